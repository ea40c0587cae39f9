#include "mssplace/encoders/cnn.hpp"

#include <cmath>

namespace mss {

void ImageInput::validate() const {
  if (channels != 1 && channels != 3)
    throw ShapeError("image input must have 1 or 3 channels, got " + std::to_string(channels));
  if (height <= 0 || width <= 0) throw ShapeError("image input needs positive spatial extent");
  if (values.rows() != channels || values.cols() != static_cast<Index>(height) * width)
    throw ShapeError("image value matrix is not channels x (height*width)");
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

CnnEncoder::CnnEncoder(ParameterStore& store, const std::string& prefix, CnnEncoderConfig cfg,
                       int branch, Rng& init_rng)
    : cfg_(std::move(cfg)) {
  if (cfg_.in_channels != 1 && cfg_.in_channels != 3)
    throw ConfigError("cnn encoder: in_channels must be 1 or 3");
  if (cfg_.output_dim <= 0) throw ConfigError("cnn encoder: output_dim must be positive");
  if (cfg_.stage_widths.empty()) throw ConfigError("cnn encoder: need at least one stage");
  if (!(cfg_.gem_p_init > 0.0) || !(cfg_.gem_eps > 0.0))
    throw ConfigError("cnn encoder: GeM exponent and eps must be positive");

  int in_c = cfg_.in_channels;
  for (std::size_t s = 0; s < cfg_.stage_widths.size(); ++s) {
    const int out_c = cfg_.stage_widths[s];
    if (out_c <= 0) throw ConfigError("cnn encoder: stage widths must be positive");
    const std::string sp = prefix + "stage" + std::to_string(s + 1) + ".";
    std::array<Conv, 3> stage;
    const char* names[3] = {"down", "a", "b"};
    for (int k = 0; k < 3; ++k) {
      Conv& c = stage[static_cast<std::size_t>(k)];
      c.in_c = k == 0 ? in_c : out_c;
      c.out_c = out_c;
      c.stride = k == 0 ? 2 : 1;
      const int fan_in = c.in_c * 9;
      c.w = &store.add(sp + names[k] + ".weight", he_normal(init_rng, out_c, fan_in, fan_in),
                       branch);
      c.b = &store.add(sp + names[k] + ".bias", Mat::Zero(out_c, 1), branch);
    }
    stages_.push_back(stage);
    in_c = out_c;
  }
  gem_p_ = &store.add(prefix + "gem.p", Mat::Constant(1, 1, cfg_.gem_p_init), branch);
  proj_w_ = &store.add(prefix + "proj.weight",
                       he_normal(init_rng, cfg_.output_dim, in_c, in_c), branch);
  proj_b_ = &store.add(prefix + "proj.bias", Mat::Zero(cfg_.output_dim, 1), branch);
}

std::shared_ptr<const ConvGeom> CnnEncoder::geom(int in_c, int h, int w, int stride) const {
  const std::array<int, 3> key = {in_c * 10000 + stride, h, w};
  std::lock_guard<std::mutex> lock(geom_mutex_);
  auto it = geom_cache_.find(key);
  if (it != geom_cache_.end()) return it->second;
  auto g = make_conv_geom(in_c, h, w, 3, 3, stride, 1);
  geom_cache_.emplace(key, g);
  return g;
}

Var CnnEncoder::apply(Tape& tape, Var x, const Conv& conv, int& h, int& w) const {
  auto g = geom(conv.in_c, h, w, conv.stride);
  Var patches = im2col(x, g);
  Var out = bias_add(matmul(leaf(tape, *conv.w), patches), leaf(tape, *conv.b));
  h = g->out_h;
  w = g->out_w;
  return out;
}

Var CnnEncoder::encode(Tape& tape, const ImageInput& in) const {
  in.validate();
  if (in.channels != cfg_.in_channels)
    throw ShapeError("cnn encoder: input has " + std::to_string(in.channels) +
                     " channels, encoder expects " + std::to_string(cfg_.in_channels));
  return encode(tape, input(tape, in.values), in.height, in.width);
}

Var CnnEncoder::encode(Tape& tape, Var x, int h, int w) const {
  if (x.rows() != cfg_.in_channels || x.cols() != static_cast<Index>(h) * w)
    throw ShapeError("cnn encoder: features are not in_channels x (h*w)");
  for (const auto& stage : stages_) {
    Var d = relu(apply(tape, x, stage[0], h, w));
    int h1 = h, w1 = w;
    Var a = relu(apply(tape, d, stage[1], h1, w1));
    Var b = apply(tape, a, stage[2], h1, w1);
    x = relu(add(d, b));
  }
  Var pooled = gem_pool(x, leaf(tape, *gem_p_), static_cast<Real>(cfg_.gem_eps));
  return bias_add(matmul(leaf(tape, *proj_w_), pooled), leaf(tape, *proj_b_));
}

}  // namespace mss
