#pragma once

#include <cmath>
#include <vector>

#include "mssplace/core/parameters.hpp"
#include "mssplace/core/types.hpp"

namespace mss {

template <class S>
struct AdamStateT {
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S epsilon = S(1e-8);
  long step_count = 0;
  std::vector<MatX<S>> m;  // first moments, parameter-store order
  std::vector<MatX<S>> v;  // second moments
};

// One Adam update with bias correction over every parameter in the store.
// lr holds one rate per parameter (store order); step_count advances by
// exactly one per call.
template <class S>
void adam_step(ParameterStoreT<S>& params, AdamStateT<S>& state, const std::vector<S>& lr) {
  const int n = params.size();
  if (static_cast<int>(lr.size()) != n)
    throw ShapeError("adam_step: one learning rate per parameter required");
  if (!(state.beta1 > S(0) && state.beta1 < S(1) && state.beta2 > S(0) && state.beta2 < S(1)))
    throw ConfigError("adam_step: betas must lie in (0,1)");
  if (!(state.epsilon > S(0))) throw ConfigError("adam_step: epsilon must be positive");

  if (state.m.empty()) {
    state.m.reserve(n);
    state.v.reserve(n);
    for (int i = 0; i < n; ++i) {
      const auto& p = params.at(i);
      state.m.push_back(MatX<S>::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(MatX<S>::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (static_cast<int>(state.m.size()) != n || static_cast<int>(state.v.size()) != n)
    throw ShapeError("adam_step: moment buffers out of sync with parameter store");

  ++state.step_count;
  const S bc1 = S(1) - std::pow(state.beta1, static_cast<S>(state.step_count));
  const S bc2 = S(1) - std::pow(state.beta2, static_cast<S>(state.step_count));

  for (int i = 0; i < n; ++i) {
    auto& p = params.at(i);
    if (!(lr[static_cast<std::size_t>(i)] > S(0)))
      throw ConfigError("adam_step: learning rate must be positive");
    if (p.grad.rows() != state.m[static_cast<std::size_t>(i)].rows() ||
        p.grad.cols() != state.m[static_cast<std::size_t>(i)].cols())
      throw ShapeError("adam_step: gradient shape mismatch for " + p.name);
    if (!p.grad.allFinite()) throw NumericError("adam_step: non-finite gradient for " + p.name);

    auto& m = state.m[static_cast<std::size_t>(i)];
    auto& v = state.v[static_cast<std::size_t>(i)];
    m = state.beta1 * m + (S(1) - state.beta1) * p.grad;
    v = state.beta2 * v + (S(1) - state.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr[static_cast<std::size_t>(i)] * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + state.epsilon);
  }
}

// Uniform-rate convenience overload.
template <class S>
void adam_step(ParameterStoreT<S>& params, AdamStateT<S>& state, S lr) {
  adam_step(params, state, std::vector<S>(static_cast<std::size_t>(params.size()), lr));
}

using AdamState = AdamStateT<Real>;

}  // namespace mss
