#include "mssplace/fusion/fusion.hpp"

#include <cmath>

namespace mss {

FusionSpec parse_fusion(const std::string& name) {
  if (name == "add") return {FusionKind::kAdd, 0};
  if (name == "concat") return {FusionKind::kConcat, 0};
  if (name == "gem1d") return {FusionKind::kGem1d, 0};
  if (name == "mlp256") return {FusionKind::kMlp, 256};
  if (name == "mlp512") return {FusionKind::kMlp, 512};
  if (name == "sa_add") return {FusionKind::kSaAdd, 0};
  if (name == "sa_concat") return {FusionKind::kSaConcat, 0};
  throw ConfigError("unknown fusion method: " + name);
}

std::string fusion_name(const FusionSpec& spec) {
  switch (spec.kind) {
    case FusionKind::kAdd: return "add";
    case FusionKind::kConcat: return "concat";
    case FusionKind::kGem1d: return "gem1d";
    case FusionKind::kMlp: return "mlp" + std::to_string(spec.mlp_output_dim);
    case FusionKind::kSaAdd: return "sa_add";
    case FusionKind::kSaConcat: return "sa_concat";
  }
  return "?";
}

namespace {

Mat he_normal(Rng& rng, Index rows, Index cols, double fan_in) {
  const double stddev = std::sqrt(2.0 / fan_in);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

EmbeddingFusion::EmbeddingFusion(ParameterStore& store, const std::string& prefix,
                                 FusionSpec spec, int k, int e, int branch, Rng& init_rng)
    : spec_(spec), k_(k), e_(e) {
  if (k < 1) throw ConfigError("fusion: need at least one input");
  if (e < 1) throw ConfigError("fusion: embedding dim must be positive");
  switch (spec_.kind) {
    case FusionKind::kAdd:
    case FusionKind::kConcat:
      break;
    case FusionKind::kGem1d:
      gem_p_ = &store.add(prefix + "gem.p", Mat::Constant(1, 1, 3.0), branch);
      break;
    case FusionKind::kMlp: {
      if (spec_.mlp_output_dim != 256 && spec_.mlp_output_dim != 512)
        throw ConfigError("fusion: MLP output dim must be 256 or 512");
      const int in = k * e;  // hidden dim equals input dim
      mlp_w1_ = &store.add(prefix + "mlp.fc1.weight", he_normal(init_rng, in, in, in), branch);
      mlp_b1_ = &store.add(prefix + "mlp.fc1.bias", Mat::Zero(in, 1), branch);
      mlp_w2_ = &store.add(prefix + "mlp.fc2.weight",
                           he_normal(init_rng, spec_.mlp_output_dim, in, in), branch);
      mlp_b2_ = &store.add(prefix + "mlp.fc2.bias", Mat::Zero(spec_.mlp_output_dim, 1), branch);
      break;
    }
    case FusionKind::kSaAdd:
    case FusionKind::kSaConcat:
      wq_ = &store.add(prefix + "sa.wq", he_normal(init_rng, e, e, e), branch);
      wk_ = &store.add(prefix + "sa.wk", he_normal(init_rng, e, e, e), branch);
      wv_ = &store.add(prefix + "sa.wv", he_normal(init_rng, e, e, e), branch);
      break;
  }
}

int EmbeddingFusion::output_dim() const {
  switch (spec_.kind) {
    case FusionKind::kAdd:
    case FusionKind::kGem1d:
    case FusionKind::kSaAdd:
      return e_;
    case FusionKind::kConcat:
    case FusionKind::kSaConcat:
      return k_ * e_;
    case FusionKind::kMlp:
      return spec_.mlp_output_dim;
  }
  return 0;
}

Var EmbeddingFusion::fuse(Tape& tape, const std::vector<Var>& inputs) const {
  if (inputs.empty()) throw ShapeError("fusion: no inputs");
  if (static_cast<int>(inputs.size()) != k_)
    throw ShapeError("fusion: expected " + std::to_string(k_) + " inputs, got " +
                     std::to_string(inputs.size()));
  for (const auto& x : inputs)
    if (x.rows() != e_ || x.cols() != 1)
      throw ShapeError("fusion: inputs must be uniform " + std::to_string(e_) + "-dim columns");

  switch (spec_.kind) {
    case FusionKind::kAdd: {
      Var acc = inputs[0];
      for (std::size_t i = 1; i < inputs.size(); ++i) acc = add(acc, inputs[i]);
      return acc;
    }
    case FusionKind::kConcat:
      return vcat(inputs);
    case FusionKind::kGem1d:
      // Coordinates act as channels, the K inputs as the pooled axis.
      return gem_pool(hcat(inputs), leaf(tape, *gem_p_), static_cast<Real>(gem_eps_));
    case FusionKind::kMlp: {
      Var x = vcat(inputs);
      Var h = gelu(bias_add(matmul(leaf(tape, *mlp_w1_), x), leaf(tape, *mlp_b1_)));
      return bias_add(matmul(leaf(tape, *mlp_w2_), h), leaf(tape, *mlp_b2_));
    }
    case FusionKind::kSaAdd:
    case FusionKind::kSaConcat: {
      Var out = self_attention_matrix(hcat(inputs), leaf(tape, *wq_), leaf(tape, *wk_),
                                      leaf(tape, *wv_));
      if (spec_.kind == FusionKind::kSaAdd) return row_sum(out);
      return reshape(out, static_cast<Index>(k_) * e_, 1);
    }
  }
  throw ConfigError("fusion: unhandled method");
}

GlobalDescriptor aggregate_modalities(const std::vector<std::pair<std::string, Vec>>& parts,
                                      bool l2_normalize_segments) {
  if (parts.empty()) throw ShapeError("aggregate: no modality descriptors");
  GlobalDescriptor out;
  Index total = 0;
  for (const auto& [name, v] : parts) total += v.size();
  out.vector.resize(total);
  Index off = 0;
  for (const auto& [name, v] : parts) {
    if (v.size() == 0) throw ShapeError("aggregate: empty descriptor for modality " + name);
    Vec seg = v;
    if (l2_normalize_segments) {
      const double n = seg.norm();
      if (n > 1e-12) seg /= n;
    }
    out.vector.segment(off, seg.size()) = seg;
    out.layout.push_back({name, off, seg.size()});
    off += seg.size();
  }
  return out;
}

Var aggregate_modalities(Tape& tape, const std::vector<Var>& parts,
                         bool l2_normalize_segments) {
  if (parts.empty()) throw ShapeError("aggregate: no modality descriptors");
  if (!l2_normalize_segments) return parts.size() == 1 ? parts[0] : vcat(parts);
  std::vector<Var> normed;
  normed.reserve(parts.size());
  for (const auto& p : parts) normed.push_back(l2_normalize(p));
  return normed.size() == 1 ? normed[0] : vcat(normed);
}

}  // namespace mss
