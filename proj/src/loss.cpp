#include "mssplace/training/loss.hpp"

namespace mss {

Var triplet_margin_loss(Var anchor, Var positive, Var negative, const TripletLossConfig& cfg) {
  if (!(cfg.margin > 0.0)) throw ConfigError("triplet loss: margin must be positive");
  Var d_ap = euclid_dist(anchor, positive);
  Var d_an = euclid_dist(anchor, negative);
  return relu(shift(sub(d_ap, d_an), static_cast<Real>(cfg.margin)));
}

PairMask PairMask::from_positions(const Mat& positions, double r_pos, double r_neg) {
  if (positions.cols() != 2) throw ShapeError("pair mask: positions must be B x 2");
  if (!(r_pos > 0.0) || !(r_neg >= r_pos))
    throw ConfigError("pair mask: need 0 < r_pos <= r_neg");
  const Index b = positions.rows();
  PairMask mask;
  mask.positives.setConstant(b, b, false);
  mask.negatives.setConstant(b, b, false);
  for (Index i = 0; i < b; ++i)
    for (Index j = i + 1; j < b; ++j) {
      const double d = (positions.row(i) - positions.row(j)).norm();
      if (d <= r_pos) {
        mask.positives(i, j) = mask.positives(j, i) = true;
      } else if (d > r_neg) {
        mask.negatives(i, j) = mask.negatives(j, i) = true;
      }
    }
  return mask;
}

void PairMask::validate() const {
  const Index b = positives.rows();
  if (positives.cols() != b || negatives.rows() != b || negatives.cols() != b)
    throw ShapeError("pair mask: matrices must be square and equally sized");
  for (Index i = 0; i < b; ++i) {
    if (positives(i, i) || negatives(i, i)) throw ConfigError("pair mask: diagonal must be false");
    for (Index j = 0; j < b; ++j) {
      if (positives(i, j) && negatives(i, j))
        throw ConfigError("pair mask: positives and negatives overlap");
      if (positives(i, j) != positives(j, i) || negatives(i, j) != negatives(j, i))
        throw ConfigError("pair mask: must be symmetric");
    }
  }
}

std::vector<Triplet> batch_hard_mine(const Mat& descriptors, const PairMask& mask) {
  const Index b = descriptors.rows();
  if (mask.size() != b) throw ShapeError("mining: mask size does not match batch");
  std::vector<Triplet> out;
  if (b < 2) return out;
  // Squared distances order identically to Euclidean ones.
  for (Index a = 0; a < b; ++a) {
    int hardest_pos = -1, hardest_neg = -1;
    double worst_pos = -1.0, best_neg = 0.0;
    for (Index j = 0; j < b; ++j) {
      if (j == a) continue;
      const double d2 = (descriptors.row(a) - descriptors.row(j)).squaredNorm();
      if (mask.positives(a, j) && d2 > worst_pos) {
        worst_pos = d2;
        hardest_pos = static_cast<int>(j);
      }
      if (mask.negatives(a, j) && (hardest_neg < 0 || d2 < best_neg)) {
        best_neg = d2;
        hardest_neg = static_cast<int>(j);
      }
    }
    if (hardest_pos >= 0 && hardest_neg >= 0)
      out.push_back({static_cast<int>(a), hardest_pos, hardest_neg});
  }
  return out;
}

}  // namespace mss
