#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mssplace/core/types.hpp"
#include "mssplace/fusion/fusion.hpp"

namespace mss {

// Immutable descriptor bank with planar (x, y) positions. The on-disk PDB1
// layout is: magic, M, D as u64 LE, row-major f64 descriptors, row-major f64
// positions (M x 2), then length-prefixed ids. Layout metadata is in-memory
// only, carried over from the model that produced the descriptors.
class DescriptorDatabase {
 public:
  static DescriptorDatabase build(Mat descriptors, Mat positions,
                                  std::vector<std::string> ids,
                                  std::vector<DescriptorSegment> layout = {});

  Index size() const { return descriptors_.rows(); }
  Index dim() const { return descriptors_.cols(); }
  const Mat& descriptors() const { return descriptors_; }
  const Mat& positions() const { return positions_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<DescriptorSegment>& layout() const { return layout_; }

  void save(const std::string& path) const;
  static DescriptorDatabase load(const std::string& path);

 private:
  Mat descriptors_;
  Mat positions_;
  std::vector<std::string> ids_;
  std::vector<DescriptorSegment> layout_;
};

struct KnnHit {
  std::string id;
  int row = -1;
  double distance = 0.0;
};

// Exact Euclidean k-nearest-neighbors, ascending distance, ties broken by id.
std::vector<KnnHit> query_knn(const DescriptorDatabase& db, const Vec& query, int k);

struct EvalProtocol {
  double distance_threshold = 25.0;  // meters
  double top_percent = 1.0;          // the "1" of AR@1%
};

struct EvalResult {
  double ar_at_1 = 0.0;                 // percent
  double ar_at_1pct = 0.0;              // percent
  int n_for_1pct = 1;
  std::vector<double> recall_at_n;      // percent, N = 1..25
};

// A query counts as localized at N if any of its top-N retrieved rows lies
// within the distance threshold of the query position.
EvalResult evaluate(const DescriptorDatabase& db, const Mat& query_descriptors,
                    const Mat& query_positions, const EvalProtocol& protocol);

}  // namespace mss
