#pragma once

#include <cmath>

#include "mssplace/core/types.hpp"

// Independent eigendecomposition oracle: cyclic Jacobi rotations on a
// symmetric matrix. Used to cross-check the PCA fit; deliberately shares no
// code with the implementation under test.

namespace testutil {

struct JacobiEigen {
  mss::Vec values;   // descending
  mss::Mat vectors;  // columns, matching values
};

inline JacobiEigen jacobi_eigen(mss::Mat a, int sweeps = 64, double tol = 1e-13) {
  const mss::Index n = a.rows();
  mss::Mat v = mss::Mat::Identity(n, n);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (mss::Index p = 0; p < n; ++p)
      for (mss::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < tol * tol) break;
    for (mss::Index p = 0; p < n; ++p)
      for (mss::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (mss::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (mss::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (mss::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  // Sort descending by eigenvalue.
  std::vector<mss::Index> order(static_cast<std::size_t>(n));
  for (mss::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](mss::Index x, mss::Index y) { return a(x, x) > a(y, y); });
  JacobiEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (mss::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace testutil
