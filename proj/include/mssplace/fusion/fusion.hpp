#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mssplace/core/ops.hpp"
#include "mssplace/core/parameters.hpp"
#include "mssplace/core/rng.hpp"

namespace mss {

enum class FusionKind { kConcat, kAdd, kGem1d, kMlp, kSaAdd, kSaConcat };

struct FusionSpec {
  FusionKind kind = FusionKind::kAdd;
  int mlp_output_dim = 0;  // 256 or 512, MLP fusion only
};

// Config strings: add | concat | gem1d | mlp256 | mlp512 | sa_add | sa_concat.
FusionSpec parse_fusion(const std::string& name);
std::string fusion_name(const FusionSpec& spec);

// Combines K same-modality embeddings (E x 1 columns) into one descriptor.
// Learnable state, where the method has any, is created per (K, E).
class EmbeddingFusion {
 public:
  EmbeddingFusion(ParameterStore& store, const std::string& prefix, FusionSpec spec, int k,
                  int e, int branch, Rng& init_rng);

  Var fuse(Tape& tape, const std::vector<Var>& inputs) const;

  int input_count() const { return k_; }
  int output_dim() const;
  const FusionSpec& spec() const { return spec_; }

 private:
  FusionSpec spec_;
  int k_ = 0, e_ = 0;
  double gem_eps_ = 1e-6;
  Parameter* gem_p_ = nullptr;
  Parameter* mlp_w1_ = nullptr;
  Parameter* mlp_b1_ = nullptr;
  Parameter* mlp_w2_ = nullptr;
  Parameter* mlp_b2_ = nullptr;
  Parameter* wq_ = nullptr;
  Parameter* wk_ = nullptr;
  Parameter* wv_ = nullptr;
};

// Final place vector: ordered concatenation of per-modality descriptors with
// the segment layout recorded.
struct DescriptorSegment {
  std::string modality;
  Index offset = 0;
  Index length = 0;
};

struct GlobalDescriptor {
  Vec vector;
  std::vector<DescriptorSegment> layout;

  Index dim() const { return vector.size(); }
};

GlobalDescriptor aggregate_modalities(const std::vector<std::pair<std::string, Vec>>& parts,
                                      bool l2_normalize_segments = false);

// Tape-side aggregation used during training; same ordering contract.
Var aggregate_modalities(Tape& tape, const std::vector<Var>& parts,
                         bool l2_normalize_segments = false);

}  // namespace mss
