#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mssplace/core/ops.hpp"
#include "mssplace/core/parameters.hpp"
#include "mssplace/core/rng.hpp"

namespace mss {

// One raster observation: RGB image (3 channels, values in [0,1]) or a
// semantic mask (1 channel, class ids remapped to [0,1]).
struct ImageInput {
  int height = 0;
  int width = 0;
  int channels = 0;
  Mat values;  // channels x (height*width), spatial index y*width + x

  void validate() const;
};

struct CnnEncoderConfig {
  int in_channels = 3;
  std::vector<int> stage_widths = {16, 32, 64, 128};
  int output_dim = 256;
  double gem_p_init = 3.0;
  double gem_eps = 1e-6;
};

// Stride-2 downsampling stages with a residual block in each, global GeM
// pooling, and a linear projection to the embedding size. Shared by the
// image, semantic-mask, and BEV point-cloud branches; only in_channels and
// widths differ.
class CnnEncoder {
 public:
  CnnEncoder(ParameterStore& store, const std::string& prefix, CnnEncoderConfig cfg, int branch,
             Rng& init_rng);

  // input.channels must equal config.in_channels. Returns output_dim x 1.
  Var encode(Tape& tape, const ImageInput& input) const;

  // Tape-level entry point; features is a channels x (h*w) variable. Lets
  // callers differentiate w.r.t. pixels.
  Var encode(Tape& tape, Var features, int h, int w) const;

  const CnnEncoderConfig& config() const { return cfg_; }
  Parameter& gem_exponent() const { return *gem_p_; }

 private:
  struct Conv {
    Parameter* w = nullptr;  // out_c x (in_c*3*3)
    Parameter* b = nullptr;  // out_c x 1
    int in_c = 0, out_c = 0, stride = 1;
  };

  Var apply(Tape& tape, Var x, const Conv& conv, int& h, int& w) const;
  std::shared_ptr<const ConvGeom> geom(int in_c, int h, int w, int stride) const;

  CnnEncoderConfig cfg_;
  std::vector<std::array<Conv, 3>> stages_;  // downsample, block conv a, block conv b
  Parameter* gem_p_ = nullptr;
  Parameter* proj_w_ = nullptr;
  Parameter* proj_b_ = nullptr;

  mutable std::mutex geom_mutex_;
  mutable std::map<std::array<int, 3>, std::shared_ptr<const ConvGeom>> geom_cache_;
};

}  // namespace mss
