#pragma once

#include <functional>
#include <vector>

#include "mssplace/core/ops.hpp"
#include "mssplace/core/rng.hpp"
#include "mssplace/core/tape.hpp"

// Shared test helpers. The finite-difference checker here is the
// independent oracle for every gradient assertion; it never calls into the
// backward pass it is checking.

namespace testutil {

inline mss::Mat random_mat(mss::Rng& rng, mss::Index r, mss::Index c, double lo = -1.0,
                           double hi = 1.0) {
  mss::Mat m(r, c);
  for (mss::Index i = 0; i < r; ++i)
    for (mss::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Builds the loss from input leaves; used both for the analytic gradients
// and for the central-difference probes.
using LossBuilder =
    std::function<mss::Var(mss::Tape&, const std::vector<mss::Var>&)>;

inline double eval_loss(const LossBuilder& build, const std::vector<mss::Mat>& xs) {
  mss::Tape tape;
  std::vector<mss::Var> vars;
  vars.reserve(xs.size());
  for (const auto& x : xs) vars.push_back(mss::input(tape, x, false));
  return build(tape, vars).value()(0, 0);
}

// Max relative error between reverse-mode gradients and central finite
// differences over every element of every input.
inline double max_rel_fd_error(const LossBuilder& build, const std::vector<mss::Mat>& xs,
                               double h = 1e-5) {
  std::vector<mss::Mat> analytic;
  {
    mss::Tape tape;
    std::vector<mss::Var> vars;
    vars.reserve(xs.size());
    for (const auto& x : xs) vars.push_back(mss::input(tape, x, true));
    mss::Var loss = build(tape, vars);
    tape.backward(loss.id());
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (mss::Index i = 0; i < xs[k].rows(); ++i)
      for (mss::Index j = 0; j < xs[k].cols(); ++j) {
        std::vector<mss::Mat> plus = xs, minus = xs;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        const double fd = (eval_loss(build, plus) - eval_loss(build, minus)) / (2.0 * h);
        const double an = analytic[k](i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
  }
  return worst;
}

// Finite-difference check for gradients that land in parameter buffers.
// `loss_value` must rebuild the forward pass from the store's current values;
// `loss_grad` runs one forward+backward and fills the store's grad buffers.
inline double max_rel_fd_error_params(const std::function<double()>& loss_value,
                                      const std::function<void()>& loss_grad,
                                      mss::ParameterStore& store, double h = 1e-5) {
  store.zero_grads();
  loss_grad();
  std::vector<mss::Mat> analytic;
  for (int i = 0; i < store.size(); ++i) analytic.push_back(store.at(i).grad);
  double worst = 0.0;
  for (int k = 0; k < store.size(); ++k) {
    auto& p = store.at(k);
    for (mss::Index i = 0; i < p.value.rows(); ++i)
      for (mss::Index j = 0; j < p.value.cols(); ++j) {
        const double saved = p.value(i, j);
        p.value(i, j) = saved + h;
        const double up = loss_value();
        p.value(i, j) = saved - h;
        const double down = loss_value();
        p.value(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = analytic[static_cast<std::size_t>(k)](i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
  }
  store.zero_grads();
  return worst;
}

}  // namespace testutil
