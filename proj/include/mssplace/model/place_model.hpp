#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mssplace/encoders/bev.hpp"
#include "mssplace/encoders/cnn.hpp"
#include "mssplace/encoders/embedding_file.hpp"
#include "mssplace/encoders/pca.hpp"
#include "mssplace/encoders/text_encoder.hpp"
#include "mssplace/encoders/tfidf.hpp"
#include "mssplace/fusion/fusion.hpp"
#include "mssplace/synth/dataset.hpp"
#include "mssplace/training/schedule.hpp"

namespace mss {

// Modalities: L (LiDAR point cloud), I (camera images), S (semantic masks),
// T (text descriptions).
enum class Modality { kCloud, kImage, kMask, kText };

std::vector<Modality> parse_modalities(const std::string& spec);  // e.g. "L+I+S+T"
std::string modalities_name(const std::vector<Modality>& mods);

// Camera subsets from the ablation protocol: F, F+B, L+R, A.
std::vector<int> camera_set_indices(const std::string& set_name, int available);

struct ModelConfig {
  std::string modalities = "L+I";
  std::string camera_set = "A";
  int dataset_cameras = 4;

  std::string fusion = "add";       // image and mask embedding fusion
  std::string text_fusion = "add";  // add | concat

  int embedding_dim = 256;
  std::vector<int> image_widths = {16, 32, 64, 128};
  std::vector<int> mask_widths = {16, 32, 64, 128};
  std::vector<int> cloud_widths = {16, 32, 64, 128};
  int mask_classes = 16;
  BevConfig bev;
  int text_pca_components = 128;
  std::string external_text_embeddings;  // EMB1 path; empty -> TF-IDF branch
  bool l2_normalize_segments = false;
  double gem_p_init = 3.0;
  double gem_eps = 1e-6;
  std::uint64_t init_seed = 1;
};

// Per-sample tensors that do not depend on trainable parameters, prepared
// once so training epochs skip voxelization, mask normalization and the
// TF-IDF/PCA pipeline.
struct PreparedSample {
  const PlaceSample* sample = nullptr;
  std::optional<ImageInput> bev;
  std::vector<ImageInput> masks_normalized;
  std::vector<Vec> text_features;
};

// The full late-fusion place-recognition model: one encoder per enabled
// modality, per-modality embedding fusion over the camera set, and
// concatenating modality aggregation.
class PlaceModel {
 public:
  explicit PlaceModel(ModelConfig config);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  bool uses(Modality m) const;
  bool needs_text_fit() const;

  // Fits TF-IDF + PCA on the texts of the given samples (TF-IDF text branch
  // only). Must run before descriptors are computed.
  void fit_text_models(const Dataset& train);

  void set_text_models(TfidfModel tfidf, PcaModel pca);
  const TfidfModel& tfidf() const { return tfidf_; }
  const PcaModel& pca() const { return pca_; }

  PreparedSample prepare(const PlaceSample& sample) const;

  Var descriptor(Tape& tape, const PreparedSample& prepared) const;
  GlobalDescriptor describe(const PlaceSample& sample) const;

  int descriptor_dim() const;
  std::vector<DescriptorSegment> layout() const;

  // p > 0 for every GeM exponent, re-applied after each optimizer step.
  void clamp_constraints();

  // Checkpoint directory: params.pkt plus fitted text models when present.
  void save_artifacts(const std::string& dir) const;
  void load_artifacts(const std::string& dir);

 private:
  ModelConfig cfg_;
  std::vector<Modality> modalities_;
  std::vector<int> cameras_;
  ParameterStore store_;

  std::optional<CnnEncoder> image_enc_, mask_enc_, cloud_enc_;
  std::optional<TextEncoder> text_enc_;
  std::optional<EmbeddingFusion> image_fusion_, mask_fusion_, text_fusion_;
  std::optional<ExternalEmbeddings> external_text_;
  TfidfModel tfidf_;
  PcaModel pca_;
  std::vector<Parameter*> gem_params_;

  Var modality_descriptor(Tape& tape, Modality m, const PreparedSample& prepared) const;
  int modality_dim(Modality m) const;
};

}  // namespace mss
