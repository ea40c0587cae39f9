#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssplace/synth/dataset.hpp"

namespace mss {

// Seeded synthetic multimodal world. Places live on a jittered grid (minimum
// separation above the training negative radius). Each place has two latent
// factors: an appearance id driving image colors, mask classes and half the
// text words, and a geometry id driving landmark placement, point clouds and
// the other text words. Alias fractions make a subset of places share one
// factor with a partner place, which caps what a single modality can
// distinguish and gives fused descriptors real headroom.
struct WorldConfig {
  int num_places = 216;
  double area_side = 1200.0;  // meters
  int traversals = 3;
  int cameras = 4;
  int image_size = 28;
  int mask_classes = 12;  // including background class 0
  int landmarks_per_place = 6;
  int vocabulary_size = 160;

  double image_noise = 0.25;        // pixel + brightness perturbation scale
  double mask_noise = 0.05;         // per-landmark class swap probability
  double cloud_noise = 0.15;        // meters of per-point jitter, plus dropout
  double text_dropout = 0.45;       // per-word drop probability
  double viewpoint_jitter_deg = 3.0;
  double position_noise = 1.0;      // meters, per-sample GPS-style jitter

  // Rotates each (place, traversal) heading by a random whole camera sector:
  // cameras see the same panorama slices in a permuted order.
  bool random_heading = false;

  double appearance_alias_fraction = 0.5;
  double geometry_alias_fraction = 0.4;

  std::uint64_t seed = 1;

  void validate() const;
};

Dataset generate_world(const WorldConfig& config);

// Deterministic pseudo-word vocabulary shared by the generator and tests.
std::vector<std::string> make_vocabulary(int size, std::uint64_t seed);

}  // namespace mss
