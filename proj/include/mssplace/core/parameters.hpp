#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mssplace/core/serial.hpp"
#include "mssplace/core/tape.hpp"
#include "mssplace/core/types.hpp"

namespace mss {

// A trainable tensor that outlives any single tape. Gradients accumulate
// here across backward passes until zero_grads.
template <class S>
struct ParameterT {
  std::string name;
  MatX<S> value;
  MatX<S> grad;
  int branch = 0;  // learning-rate group, assigned by the owning model

  ParameterT(std::string n, MatX<S> v, int br)
      : name(std::move(n)), value(std::move(v)), branch(br) {
    grad = MatX<S>::Zero(value.rows(), value.cols());
  }
};

// Ordered collection of named parameters. Registration order is the
// checkpoint order and the optimizer's moment-buffer order.
template <class S>
class ParameterStoreT {
 public:
  template <class Derived>
  ParameterT<S>& add(const std::string& name, const Eigen::MatrixBase<Derived>& init,
                     int branch = 0) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<ParameterT<S>>(name, MatX<S>(init), branch));
    index_[name] = static_cast<int>(params_.size()) - 1;
    return *params_.back();
  }

  int size() const { return static_cast<int>(params_.size()); }
  ParameterT<S>& at(int i) { return *params_[static_cast<std::size_t>(i)]; }
  const ParameterT<S>& at(int i) const { return *params_[static_cast<std::size_t>(i)]; }

  ParameterT<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[static_cast<std::size_t>(it->second)].get();
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  std::vector<std::string> shape_signature(const std::string& strip_prefix = "") const {
    std::vector<std::string> out;
    for (const auto& p : params_) {
      std::string n = p->name;
      if (!strip_prefix.empty() && n.rfind(strip_prefix, 0) == 0) n = n.substr(strip_prefix.size());
      out.push_back(n + ":" + std::to_string(p->value.rows()) + "x" +
                    std::to_string(p->value.cols()));
    }
    return out;
  }

  // PKT1 checkpoint: magic, then per tensor a length-prefixed name, rank and
  // extents as little-endian u64, and row-major 64-bit values.
  void save(const std::string& path) const {
    auto os = serial::open_out(path);
    serial::write_bytes(os, "PKT1", 4);
    for (const auto& p : params_) {
      serial::write_string(os, p->name);
      serial::write_u64(os, 2);
      serial::write_u64(os, static_cast<std::uint64_t>(p->value.rows()));
      serial::write_u64(os, static_cast<std::uint64_t>(p->value.cols()));
      for (Index r = 0; r < p->value.rows(); ++r)
        for (Index c = 0; c < p->value.cols(); ++c)
          serial::write_f64(os, static_cast<double>(p->value(r, c)));
    }
    if (!os) throw DataError("write failed: " + path);
  }

  // Restores values into an already-built store; every tensor in the file
  // must match an existing parameter by name and shape.
  void load(const std::string& path) {
    auto is = serial::open_in(path);
    serial::expect_magic(is, "PKT1", "PKT1 checkpoint");
    std::size_t loaded = 0;
    while (is.peek() != std::char_traits<char>::eof()) {
      const std::string name = serial::read_string(is, "tensor name");
      const std::uint64_t rank = serial::read_u64(is, "tensor rank");
      if (rank != 1 && rank != 2) throw DataError("unsupported tensor rank in checkpoint: " + name);
      std::uint64_t rows = serial::read_u64(is, "tensor extent");
      std::uint64_t cols = rank == 2 ? serial::read_u64(is, "tensor extent") : 1;
      ParameterT<S>* p = find(name);
      if (!p) throw DataError("checkpoint tensor has no matching parameter: " + name);
      if (p->value.rows() != static_cast<Index>(rows) || p->value.cols() != static_cast<Index>(cols))
        throw DataError("checkpoint shape mismatch for " + name);
      for (std::uint64_t r = 0; r < rows; ++r)
        for (std::uint64_t c = 0; c < cols; ++c)
          p->value(static_cast<Index>(r), static_cast<Index>(c)) =
              static_cast<S>(serial::read_f64(is, "tensor value"));
      ++loaded;
    }
    if (loaded != params_.size())
      throw DataError("checkpoint tensor count mismatch: got " + std::to_string(loaded) +
                      ", expected " + std::to_string(params_.size()));
  }

 private:
  std::vector<std::unique_ptr<ParameterT<S>>> params_;
  std::map<std::string, int> index_;
};

// Tape leaf bound to a parameter: backward flushes the node gradient into the
// parameter's persistent buffer.
template <class S>
VarT<S> leaf(TapeT<S>& tape, ParameterT<S>& param) {
  ParameterT<S>* p = &param;
  return tape.emplace(param.value, true, [p](TapeT<S>& t, int self) {
    p->grad += t.grad(self);
  });
}

// Constant leaf; never receives gradient.
template <class S, class Derived>
VarT<S> constant(TapeT<S>& tape, const Eigen::MatrixBase<Derived>& value) {
  return tape.emplace(MatX<S>(value), false);
}

// Input leaf; set requires_grad to probe gradients w.r.t. data.
template <class S, class Derived>
VarT<S> input(TapeT<S>& tape, const Eigen::MatrixBase<Derived>& value,
              bool requires_grad = false) {
  return tape.emplace(MatX<S>(value), requires_grad);
}

using Parameter = ParameterT<Real>;
using ParameterStore = ParameterStoreT<Real>;

}  // namespace mss
