#pragma once

#include <string>

#include "mssplace/core/ops.hpp"
#include "mssplace/core/parameters.hpp"
#include "mssplace/core/rng.hpp"
#include "mssplace/encoders/pca.hpp"
#include "mssplace/encoders/tfidf.hpp"

namespace mss {

// Two-layer MLP head for text features: linear(in -> in), GELU,
// linear(in -> out). The input is either a PCA-reduced TF-IDF vector or an
// externally computed embedding.
class TextEncoder {
 public:
  TextEncoder(ParameterStore& store, const std::string& prefix, int input_dim, int output_dim,
              int branch, Rng& init_rng);

  Var encode(Tape& tape, const Vec& features) const;
  Var encode(Tape& tape, Var features) const;

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }

 private:
  int input_dim_, output_dim_;
  Parameter* w1_ = nullptr;
  Parameter* b1_ = nullptr;
  Parameter* w2_ = nullptr;
  Parameter* b2_ = nullptr;
};

// Full TF-IDF text branch: tfidf -> pca -> MLP.
Var encode_text(Tape& tape, const std::string& doc, const TfidfModel& tfidf,
                const PcaModel& pca, const TextEncoder& mlp);

}  // namespace mss
