#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "mssplace/core/parameters.hpp"
#include "mssplace/core/tape.hpp"
#include "mssplace/core/types.hpp"

// Expression-style free functions over tape variables. Embeddings are column
// vectors; CNN feature maps are C x (H*W) matrices with spatial index
// s = y*W + x.

namespace mss {

namespace detail {

template <class S>
inline void require_same_tape(const VarT<S>& a, const VarT<S>& b) {
  if (a.tape() != b.tape()) throw ConfigError("operands live on different tapes");
}

template <class S>
inline void require_same_shape(const VarT<S>& a, const VarT<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace detail

template <class S>
VarT<S> add(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  return t.emplace(a.value() + b.value(), ng, [pa, pb](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, t.grad(self));
    t.accumulate_grad(pb, t.grad(self));
  });
}

template <class S>
VarT<S> sub(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  return t.emplace(a.value() - b.value(), ng, [pa, pb](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, t.grad(self));
    t.accumulate_grad(pb, -t.grad(self));
  });
}

// Elementwise product.
template <class S>
VarT<S> cmul(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "cmul");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  return t.emplace(a.value().cwiseProduct(b.value()), ng, [pa, pb](TapeT<S>& t, int self) {
    if (t.needs_grad(pa)) t.accumulate_grad(pa, t.grad(self).cwiseProduct(t.value(pb)));
    if (t.needs_grad(pb)) t.accumulate_grad(pb, t.grad(self).cwiseProduct(t.value(pa)));
  });
}

template <class S>
VarT<S> scale(VarT<S> a, S c) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  return t.emplace(a.value() * c, t.needs_grad(pa), [pa, c](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, t.grad(self) * c);
  });
}

// Elementwise addition of a constant.
template <class S>
VarT<S> shift(VarT<S> a, S c) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  return t.emplace((a.value().array() + c).matrix(), t.needs_grad(pa),
                   [pa](TapeT<S>& t, int self) { t.accumulate_grad(pa, t.grad(self)); });
}

template <class S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions disagree");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  return t.emplace(a.value() * b.value(), ng, [pa, pb](TapeT<S>& t, int self) {
    const MatX<S>& g = t.grad(self);
    if (t.needs_grad(pa)) t.accumulate_grad(pa, g * t.value(pb).transpose());
    if (t.needs_grad(pb)) t.accumulate_grad(pb, t.value(pa).transpose() * g);
  });
}

template <class S>
VarT<S> transpose(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  return t.emplace(a.value().transpose(), t.needs_grad(pa), [pa](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, t.grad(self).transpose());
  });
}

// Storage-order (column-major) reshape.
template <class S>
VarT<S> reshape(VarT<S> a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols()) throw ShapeError("reshape: element count changes");
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const Index pr = a.rows(), pc = a.cols();
  MatX<S> v = Eigen::Map<const MatX<S>>(a.value().data(), rows, cols);
  return t.emplace(std::move(v), t.needs_grad(pa), [pa, pr, pc](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, MatX<S>(Eigen::Map<const MatX<S>>(t.grad(self).data(), pr, pc)));
  });
}

// Concatenate columns.
template <class S>
VarT<S> hcat(const std::vector<VarT<S>>& parts) {
  if (parts.empty()) throw ShapeError("hcat: no inputs");
  TapeT<S>& t = *parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool ng = false;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.rows() != rows) throw ShapeError("hcat: row counts disagree");
    cols += p.cols();
    ng = ng || t.needs_grad(p.id());
  }
  MatX<S> v(rows, cols);
  std::vector<int> ids;
  std::vector<Index> widths;
  Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    widths.push_back(p.cols());
    off += p.cols();
  }
  return t.emplace(std::move(v), ng, [ids, widths](TapeT<S>& t, int self) {
    const MatX<S>& g = t.grad(self);
    Index off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate_grad(ids[i], g.middleCols(off, widths[i]));
      off += widths[i];
    }
  });
}

// Concatenate rows (stacks column vectors into one long vector).
template <class S>
VarT<S> vcat(const std::vector<VarT<S>>& parts) {
  if (parts.empty()) throw ShapeError("vcat: no inputs");
  TapeT<S>& t = *parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  bool ng = false;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.cols() != cols) throw ShapeError("vcat: column counts disagree");
    rows += p.rows();
    ng = ng || t.needs_grad(p.id());
  }
  MatX<S> v(rows, cols);
  std::vector<int> ids;
  std::vector<Index> heights;
  Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    heights.push_back(p.rows());
    off += p.rows();
  }
  return t.emplace(std::move(v), ng, [ids, heights](TapeT<S>& t, int self) {
    const MatX<S>& g = t.grad(self);
    Index off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate_grad(ids[i], g.middleRows(off, heights[i]));
      off += heights[i];
    }
  });
}

// Extract one column.
template <class S>
VarT<S> col(VarT<S> a, Index j) {
  if (j < 0 || j >= a.cols()) throw ShapeError("col: index out of range");
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const Index pr = a.rows(), pc = a.cols();
  return t.emplace(a.value().col(j), t.needs_grad(pa), [pa, j, pr, pc](TapeT<S>& t, int self) {
    MatX<S> g = MatX<S>::Zero(pr, pc);
    g.col(j) = t.grad(self);
    t.accumulate_grad(pa, g);
  });
}

// Sum across columns: M x N -> M x 1.
template <class S>
VarT<S> row_sum(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const Index n = a.cols();
  return t.emplace(a.value().rowwise().sum(), t.needs_grad(pa), [pa, n](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, t.grad(self).replicate(1, n));
  });
}

template <class S>
VarT<S> sum_all(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const Index pr = a.rows(), pc = a.cols();
  MatX<S> v(1, 1);
  v(0, 0) = a.value().sum();
  return t.emplace(std::move(v), t.needs_grad(pa), [pa, pr, pc](TapeT<S>& t, int self) {
    t.accumulate_grad(pa, MatX<S>::Constant(pr, pc, t.grad(self)(0, 0)));
  });
}

template <class S>
VarT<S> mean_all(VarT<S> a) {
  if (a.rows() * a.cols() == 0) throw ShapeError("mean_all: empty input");
  return scale(sum_all(a), S(1) / static_cast<S>(a.rows() * a.cols()));
}

template <class S>
VarT<S> relu(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  return t.emplace(a.value().cwiseMax(S(0)), t.needs_grad(pa), [pa](TapeT<S>& t, int self) {
    const MatX<S> mask = (t.value(pa).array() > S(0)).template cast<S>().matrix();
    t.accumulate_grad(pa, t.grad(self).cwiseProduct(mask));
  });
}

// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
template <class S>
VarT<S> gelu(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  auto phi_cdf = [inv_sqrt2](S x) { return S(0.5) * (S(1) + std::erf(x * inv_sqrt2)); };
  MatX<S> v = a.value().unaryExpr([&](S x) { return x * phi_cdf(x); });
  return t.emplace(std::move(v), t.needs_grad(pa), [pa, phi_cdf](TapeT<S>& t, int self) {
    const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * S(M_PI));
    const MatX<S> d = t.value(pa).unaryExpr([&](S x) {
      return phi_cdf(x) + x * inv_sqrt2pi * std::exp(S(-0.5) * x * x);
    });
    t.accumulate_grad(pa, t.grad(self).cwiseProduct(d));
  });
}

// Row-wise softmax with max-shift stabilization.
template <class S>
VarT<S> softmax_rows(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  MatX<S> v = a.value();
  for (Index r = 0; r < v.rows(); ++r) {
    v.row(r) = (v.row(r).array() - v.row(r).maxCoeff()).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  return t.emplace(std::move(v), t.needs_grad(pa), [pa](TapeT<S>& t, int self) {
    const MatX<S>& y = t.value(self);
    const MatX<S>& g = t.grad(self);
    MatX<S> gx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const S dot = g.row(r).dot(y.row(r));
      gx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate_grad(pa, gx);
  });
}

// Per-column bias: a(M x N) + b(M x 1) broadcast across columns.
template <class S>
VarT<S> bias_add(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  if (b.cols() != 1 || b.rows() != a.rows()) throw ShapeError("bias_add: bias must be rows(a) x 1");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  MatX<S> v = a.value();
  v.colwise() += b.value().col(0);
  return t.emplace(std::move(v), ng, [pa, pb](TapeT<S>& t, int self) {
    const MatX<S>& g = t.grad(self);
    t.accumulate_grad(pa, g);
    if (t.needs_grad(pb)) t.accumulate_grad(pb, g.rowwise().sum());
  });
}

// Generalized-mean pooling over the spatial axis of a C x S feature map.
// out[c] = (mean_s max(f[c,s], eps)^p)^(1/p), differentiable in f and p.
template <class S>
VarT<S> gem_pool(VarT<S> features, VarT<S> p, S eps) {
  detail::require_same_tape(features, p);
  if (features.cols() < 1) throw ShapeError("gem_pool: empty input (no spatial positions)");
  if (p.rows() != 1 || p.cols() != 1) throw ShapeError("gem_pool: exponent must be a 1x1 tensor");
  if (eps <= S(0)) throw ConfigError("gem_pool: eps must be positive");
  TapeT<S>& t = *features.tape();
  const S pv = p.value()(0, 0);
  if (!(pv > S(0))) throw NumericError("gem_pool: exponent must be positive");

  const Index spatial = features.cols();
  MatX<S> clamped = features.value().cwiseMax(eps);
  MatX<S> powed = (clamped.array().log() * pv).exp().matrix();  // clamped^p
  MatX<S> mean_pow = powed.rowwise().sum() / static_cast<S>(spatial);
  MatX<S> out = (mean_pow.array().log() / pv).exp().matrix();  // mean^(1/p)

  const bool ng = t.needs_grad(features.id()) || t.needs_grad(p.id());
  const int pf = features.id(), pp = p.id();
  struct Saved {
    MatX<S> clamped, powed, mean_pow;
    S pv, eps;
    Index spatial;
  };
  auto saved = std::make_shared<Saved>(Saved{std::move(clamped), std::move(powed),
                                             std::move(mean_pow), pv, eps, spatial});
  return t.emplace(std::move(out), ng, [pf, pp, saved](TapeT<S>& t, int self) {
    const MatX<S>& g = t.grad(self);      // C x 1
    const MatX<S>& out = t.value(self);   // C x 1
    const S pv = saved->pv;
    const S inv_s = S(1) / static_cast<S>(saved->spatial);
    if (t.needs_grad(pf)) {
      // d out_c / d f_cs = [f_cs > eps] * out_c^(1-p) * clamped_cs^(p-1) / S
      MatX<S> coef = (out.array().log() * (S(1) - pv)).exp().matrix();  // out^(1-p), C x 1
      MatX<S> gf = saved->powed.cwiseQuotient(saved->clamped);          // clamped^(p-1)
      gf.array().colwise() *= coef.col(0).array() * g.col(0).array() * inv_s;
      const MatX<S> mask = (t.value(pf).array() > saved->eps).template cast<S>().matrix();
      t.accumulate_grad(pf, gf.cwiseProduct(mask));
    }
    if (t.needs_grad(pp)) {
      // d out_c / d p = out_c * (-ln(m_c)/p^2 + mean_s(y^p ln y) / (p m_c))
      const auto log_clamped = saved->clamped.array().log();
      MatX<S> mean_pow_log =
          (saved->powed.array() * log_clamped).rowwise().sum().matrix() * inv_s;  // C x 1
      S gp = 0;
      for (Index c = 0; c < out.rows(); ++c) {
        const S m = saved->mean_pow(c, 0);
        const S dp = out(c, 0) * (-std::log(m) / (pv * pv) + mean_pow_log(c, 0) / (pv * m));
        gp += g(c, 0) * dp;
      }
      MatX<S> gpm(1, 1);
      gpm(0, 0) = gp;
      t.accumulate_grad(pp, gpm);
    }
  });
}

// x / ||x||_2, with a floor on the norm to stay defined at the origin.
template <class S>
VarT<S> l2_normalize(VarT<S> a, S floor = S(1e-12)) {
  TapeT<S>& t = *a.tape();
  const int pa = a.id();
  const S n = std::max(a.value().norm(), floor);
  return t.emplace(a.value() / n, t.needs_grad(pa), [pa, n](TapeT<S>& t, int self) {
    const MatX<S>& y = t.value(self);  // x / n
    const MatX<S>& g = t.grad(self);
    const S dot = (y.array() * g.array()).sum();
    t.accumulate_grad(pa, (g - dot * y) / n);
  });
}

// Euclidean distance between two same-shape tensors, as a 1x1 node.
// Subgradient 0 at coincident points.
template <class S>
VarT<S> euclid_dist(VarT<S> a, VarT<S> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "euclid_dist");
  TapeT<S>& t = *a.tape();
  const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
  const int pa = a.id(), pb = b.id();
  MatX<S> v(1, 1);
  v(0, 0) = (a.value() - b.value()).norm();
  return t.emplace(std::move(v), ng, [pa, pb](TapeT<S>& t, int self) {
    const S d = t.value(self)(0, 0);
    if (d <= S(0)) return;
    const S g = t.grad(self)(0, 0);
    const MatX<S> dir = (t.value(pa) - t.value(pb)) * (g / d);
    t.accumulate_grad(pa, dir);
    t.accumulate_grad(pb, -dir);
  });
}

// ---- Convolution support -------------------------------------------------

// Precomputed gather map for one (input size, kernel) combination. The
// im2col matrix has C*kh*kw rows and out_h*out_w columns; gather holds, in
// column-major order, the flat source index into the C x (H*W) input
// (column-major), or -1 for zero padding.
struct ConvGeom {
  int in_c = 0, in_h = 0, in_w = 0;
  int kh = 0, kw = 0, stride = 1, pad = 0;
  int out_h = 0, out_w = 0;
  std::vector<std::int32_t> gather;

  int patch_rows() const { return in_c * kh * kw; }
  int out_cols() const { return out_h * out_w; }
};

inline std::shared_ptr<const ConvGeom> make_conv_geom(int in_c, int in_h, int in_w, int kh,
                                                      int kw, int stride, int pad) {
  auto g = std::make_shared<ConvGeom>();
  g->in_c = in_c;
  g->in_h = in_h;
  g->in_w = in_w;
  g->kh = kh;
  g->kw = kw;
  g->stride = stride;
  g->pad = pad;
  g->out_h = (in_h + 2 * pad - kh) / stride + 1;
  g->out_w = (in_w + 2 * pad - kw) / stride + 1;
  if (in_h + 2 * pad < kh || in_w + 2 * pad < kw || g->out_h < 1 || g->out_w < 1)
    throw ConfigError("convolution: degenerate spatial size after striding");
  const int rows = g->patch_rows();
  const int cols = g->out_cols();
  g->gather.assign(static_cast<std::size_t>(rows) * cols, -1);
  for (int o = 0; o < cols; ++o) {
    const int oy = o / g->out_w, ox = o % g->out_w;
    for (int c = 0; c < in_c; ++c)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          const int y = oy * stride - pad + ky;
          const int x = ox * stride - pad + kx;
          if (y < 0 || y >= in_h || x < 0 || x >= in_w) continue;
          const int r = (c * kh + ky) * kw + kx;
          g->gather[static_cast<std::size_t>(o) * rows + r] =
              static_cast<std::int32_t>((y * in_w + x) * in_c + c);
        }
  }
  return g;
}

// Patch extraction as a linear (gather) op; backward is the scatter-add.
template <class S>
VarT<S> im2col(VarT<S> x, std::shared_ptr<const ConvGeom> geom) {
  if (x.rows() != geom->in_c || x.cols() != static_cast<Index>(geom->in_h) * geom->in_w)
    throw ShapeError("im2col: input is not C x (H*W) for this geometry");
  TapeT<S>& t = *x.tape();
  const int px = x.id();
  const int rows = geom->patch_rows(), cols = geom->out_cols();
  MatX<S> v(rows, cols);
  {
    const S* src = x.value().data();
    S* dst = v.data();
    const std::int32_t* map = geom->gather.data();
    const std::size_t n = geom->gather.size();
    for (std::size_t i = 0; i < n; ++i) dst[i] = map[i] < 0 ? S(0) : src[map[i]];
  }
  return t.emplace(std::move(v), t.needs_grad(px), [px, geom](TapeT<S>& t, int self) {
    if (!t.needs_grad(px)) return;
    MatX<S> gx = MatX<S>::Zero(geom->in_c, static_cast<Index>(geom->in_h) * geom->in_w);
    const MatX<S>& g = t.grad(self);
    const S* gs = g.data();
    S* gd = gx.data();
    const std::int32_t* map = geom->gather.data();
    const std::size_t n = geom->gather.size();
    for (std::size_t i = 0; i < n; ++i)
      if (map[i] >= 0) gd[map[i]] += gs[i];
    t.accumulate_grad(px, gx);
  });
}

// ---- Self-attention -------------------------------------------------------

// Single-head scaled dot-product attention over K column-vector embeddings
// stacked as the columns of an E x K matrix, with a residual connection:
// out = X + V * softmax(Q^T K / sqrt(E))^T,  Q = Wq X, K = Wk X, V = Wv X.
template <class S>
VarT<S> self_attention_matrix(VarT<S> stacked, VarT<S> wq, VarT<S> wk, VarT<S> wv) {
  const Index e = stacked.rows();
  if (stacked.cols() < 1) throw ShapeError("self_attention: need at least one embedding");
  for (const VarT<S>* w : {&wq, &wk, &wv})
    if (w->rows() != e || w->cols() != e)
      throw ShapeError("self_attention: projection weights must be E x E");
  VarT<S> q = matmul(wq, stacked);
  VarT<S> k = matmul(wk, stacked);
  VarT<S> v = matmul(wv, stacked);
  VarT<S> logits = scale(matmul(transpose(q), k), S(1) / std::sqrt(static_cast<S>(e)));
  VarT<S> attn = softmax_rows(logits);
  return add(stacked, matmul(v, transpose(attn)));
}

template <class S>
std::vector<VarT<S>> self_attention(const std::vector<VarT<S>>& embeddings, VarT<S> wq,
                                    VarT<S> wk, VarT<S> wv) {
  if (embeddings.empty()) throw ShapeError("self_attention: no inputs");
  for (const auto& x : embeddings)
    if (x.cols() != 1 || x.rows() != embeddings.front().rows())
      throw ShapeError("self_attention: inputs must be uniform column vectors");
  VarT<S> out = self_attention_matrix(hcat(embeddings), wq, wk, wv);
  std::vector<VarT<S>> cols;
  cols.reserve(embeddings.size());
  for (Index j = 0; j < out.cols(); ++j) cols.push_back(col(out, j));
  return cols;
}

}  // namespace mss
