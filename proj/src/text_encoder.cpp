#include "mssplace/encoders/text_encoder.hpp"

#include <cmath>

namespace mss {

namespace {

Mat he_normal(Rng& rng, Index rows, Index cols, double fan_in) {
  const double stddev = std::sqrt(2.0 / fan_in);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

TextEncoder::TextEncoder(ParameterStore& store, const std::string& prefix, int input_dim,
                         int output_dim, int branch, Rng& init_rng)
    : input_dim_(input_dim), output_dim_(output_dim) {
  if (input_dim <= 0 || output_dim <= 0)
    throw ConfigError("text encoder: dimensions must be positive");
  w1_ = &store.add(prefix + "fc1.weight", he_normal(init_rng, input_dim, input_dim, input_dim),
                   branch);
  b1_ = &store.add(prefix + "fc1.bias", Mat::Zero(input_dim, 1), branch);
  w2_ = &store.add(prefix + "fc2.weight", he_normal(init_rng, output_dim, input_dim, input_dim),
                   branch);
  b2_ = &store.add(prefix + "fc2.bias", Mat::Zero(output_dim, 1), branch);
}

Var TextEncoder::encode(Tape& tape, const Vec& features) const {
  return encode(tape, input(tape, Mat(features)));
}

Var TextEncoder::encode(Tape& tape, Var x) const {
  if (x.rows() != input_dim_ || x.cols() != 1)
    throw ShapeError("text encoder: features must be input_dim x 1");
  Var h = gelu(bias_add(matmul(leaf(tape, *w1_), x), leaf(tape, *b1_)));
  return bias_add(matmul(leaf(tape, *w2_), h), leaf(tape, *b2_));
}

Var encode_text(Tape& tape, const std::string& doc, const TfidfModel& tfidf,
                const PcaModel& pca, const TextEncoder& mlp) {
  if (!tfidf.fitted()) throw ConfigError("encode_text: tf-idf model is not fitted");
  if (!pca.fitted()) throw ConfigError("encode_text: pca model is not fitted");
  return mlp.encode(tape, project_pca(pca, transform_tfidf(tfidf, doc)));
}

}  // namespace mss
