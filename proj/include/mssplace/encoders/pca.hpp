#pragma once

#include <string>

#include "mssplace/core/types.hpp"

namespace mss {

// Principal components of a centered sample covariance (divisor n-1).
// Component rows are orthonormal; variances are sorted descending. Signs are
// fixed so each component's largest-magnitude coefficient is positive.
struct PcaModel {
  Vec mean;                // input dim
  Mat components;          // k x input dim
  Vec explained_variance;  // k, nonincreasing, >= 0
  bool rank_deficient = false;

  bool fitted() const { return components.rows() > 0; }
  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return components.rows(); }

  void save(const std::string& path) const;
  static PcaModel load(const std::string& path);
};

// rows: one sample per row. Needs at least k samples and input dim >= k.
// With fewer than k significantly nonzero eigenvalues the model is still
// returned (orthonormal directions, zero variance) and flagged rank_deficient.
PcaModel fit_pca(const Mat& rows, int k);

Vec project_pca(const PcaModel& model, const Vec& v);

}  // namespace mss
