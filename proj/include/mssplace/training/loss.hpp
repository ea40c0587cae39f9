#pragma once

#include <vector>

#include "mssplace/core/ops.hpp"

namespace mss {

struct TripletLossConfig {
  double margin = 0.2;
};

// max(0, ||a-p|| - ||a-n|| + m); subgradient 0 at the hinge.
Var triplet_margin_loss(Var anchor, Var positive, Var negative, const TripletLossConfig& cfg);

// Batch relations derived from positions: within r_pos meters -> positive,
// beyond r_neg meters -> negative, in between -> neither.
struct PairMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> positives;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> negatives;

  Index size() const { return positives.rows(); }
  static PairMask from_positions(const Mat& positions, double r_pos, double r_neg);
  void validate() const;
};

struct Triplet {
  int anchor = -1;
  int positive = -1;
  int negative = -1;
};

// Per anchor: farthest positive, nearest negative; ties resolved toward the
// lowest index; anchors lacking either side are skipped.
std::vector<Triplet> batch_hard_mine(const Mat& descriptors, const PairMask& mask);

}  // namespace mss
