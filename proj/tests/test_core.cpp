#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mssplace/core/adam.hpp"
#include "mssplace/core/ops.hpp"
#include "support/testutil.hpp"

using namespace mss;
using testutil::max_rel_fd_error;
using testutil::random_mat;

TEST_CASE("backward: d(x*x)/dx at x=3 is 6") {
  Tape tape;
  Var x = input(tape, Mat::Constant(1, 1, 3.0), true);
  Var loss = cmul(x, x);
  tape.backward(loss.id());
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("backward: constant loss leaves all grads zero") {
  Tape tape;
  Var x = input(tape, Mat::Constant(2, 1, 1.5), true);
  Var c = constant(tape, Mat::Constant(1, 1, 7.0));
  tape.backward(c.id());
  CHECK(x.grad().isZero());
}

TEST_CASE("backward: non-scalar loss rejected") {
  Tape tape;
  Var x = input(tape, Mat::Ones(2, 2), true);
  CHECK_THROWS_AS(tape.backward(x.id()), ShapeError);
}

TEST_CASE("backward twice accumulates exactly twice") {
  Tape tape;
  Var x = input(tape, Mat::Constant(1, 1, 2.0), true);
  Var loss = cmul(x, cmul(x, x));  // x^3, grad 3x^2 = 12
  tape.backward(loss.id());
  tape.backward(loss.id());
  CHECK(x.grad()(0, 0) == doctest::Approx(24.0));
}

TEST_CASE("non-finite forward value raises a numeric error") {
  Tape tape;
  Mat bad = Mat::Ones(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(input(tape, bad), NumericError);
}

TEST_CASE("parameter leaves flush into persistent grad buffers") {
  ParameterStore store;
  Parameter& w = store.add("w", Mat::Constant(1, 1, 5.0));
  {
    Tape tape;
    Var wl = leaf(tape, w);
    Var loss = cmul(wl, wl);
    tape.backward(loss.id());
  }
  CHECK(w.grad(0, 0) == doctest::Approx(10.0));
  store.zero_grads();
  CHECK(w.grad.isZero());
}

TEST_CASE("finite differences: composite of elementwise and matmul ops") {
  Rng rng(7);
  for (int it = 0; it < 5; ++it) {
    Mat a = random_mat(rng, 3, 4), b = random_mat(rng, 4, 2), c = random_mat(rng, 3, 2);
    auto build = [](Tape& t, const std::vector<Var>& xs) {
      Var y = matmul(xs[0], xs[1]);
      y = add(y, xs[2]);
      y = cmul(y, y);
      return mean_all(y);
    };
    CHECK(max_rel_fd_error(build, {a, b, c}) < 1e-4);
  }
}

TEST_CASE("gem_pool: p=1 reduces to the arithmetic mean") {
  Tape tape;
  Mat row(1, 2);
  row << 2.0, 4.0;
  Var f = input(tape, row);
  Var p = input(tape, Mat::Constant(1, 1, 1.0));
  Var out = gem_pool(f, p, 1e-6);
  CHECK(out.value()(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("gem_pool: constant row is a fixed point for any exponent") {
  for (double pval : {1.0, 2.5, 7.0}) {
    Tape tape;
    Var f = input(tape, Mat::Constant(1, 3, 0.37));
    Var p = input(tape, Mat::Constant(1, 1, pval));
    CHECK(gem_pool(f, p, 1e-6).value()(0, 0) == doctest::Approx(0.37));
  }
}

TEST_CASE("gem_pool: p=3 on [1,2,3] matches hand evaluation") {
  Tape tape;
  Mat row(1, 3);
  row << 1.0, 2.0, 3.0;
  Var f = input(tape, row);
  Var p = input(tape, Mat::Constant(1, 1, 3.0));
  // ((1 + 8 + 27)/3)^(1/3) = 12^(1/3)
  CHECK(gem_pool(f, p, 1e-6).value()(0, 0) == doctest::Approx(std::cbrt(12.0)).epsilon(1e-12));
}

TEST_CASE("gem_pool: output climbs monotonically toward the channel max in p") {
  Rng rng(11);
  Mat f = random_mat(rng, 4, 6, 0.1, 2.0);
  double prev = -1e300;
  for (double pval : {1.0, 4.0, 16.0, 64.0}) {
    Tape tape;
    Var out = gem_pool(input(tape, f), input(tape, Mat::Constant(1, 1, pval)), 1e-6);
    const double v = out.value().sum();
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  Tape tape;
  Var out = gem_pool(input(tape, f), input(tape, Mat::Constant(1, 1, 64.0)), 1e-6);
  for (Index c = 0; c < f.rows(); ++c) CHECK(out.value()(c, 0) <= f.row(c).maxCoeff() + 1e-9);
}

TEST_CASE("gem_pool: empty spatial axis is an error") {
  Tape tape;
  Var f = input(tape, Mat(3, 0));
  Var p = input(tape, Mat::Constant(1, 1, 3.0));
  CHECK_THROWS_AS(gem_pool(f, p, 1e-6), ShapeError);
}

TEST_CASE("gem_pool gradients match finite differences (features and p)") {
  Rng rng(23);
  for (int it = 0; it < 5; ++it) {
    Mat f = random_mat(rng, 3, 5, 0.2, 1.7);
    Mat p = Mat::Constant(1, 1, rng.uniform(1.2, 4.0));
    auto build = [](Tape& t, const std::vector<Var>& xs) {
      return mean_all(gem_pool(xs[0], xs[1], 1e-6));
    };
    CHECK(max_rel_fd_error(build, {f, p}) < 1e-4);
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParameterStore store;
  store.add("w", Mat::Constant(2, 2, 1.25));
  AdamState st;
  adam_step(store, st, 0.1);
  CHECK(store.at(0).value.isApproxToConstant(1.25));
  CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step with unit gradient moves by lr/(1+eps)") {
  ParameterStore store;
  Parameter& w = store.add("w", Mat::Constant(1, 1, 0.5));
  w.grad(0, 0) = 1.0;
  AdamState st;
  adam_step(store, st, 0.1);
  // m_hat = 1, v_hat = 1 after bias correction, so step = lr * 1/(1+eps).
  CHECK(w.value(0, 0) == doctest::Approx(0.5 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam: constant gradient gives strictly monotone decrease") {
  ParameterStore store;
  Parameter& w = store.add("w", Mat::Constant(1, 1, 1.0));
  AdamState st;
  double prev = 1.0;
  for (int i = 0; i < 5; ++i) {
    w.grad(0, 0) = 1.0;
    adam_step(store, st, 0.01);
    CHECK(w.value(0, 0) < prev);
    prev = w.value(0, 0);
  }
  CHECK(st.step_count == 5);
}

TEST_CASE("adam: identical inputs give bit-identical trajectories") {
  auto run = [] {
    ParameterStore store;
    Parameter& w = store.add("w", Mat::Constant(2, 3, 0.7));
    AdamState st;
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
      w.grad = random_mat(rng, 2, 3);
      adam_step(store, st, 0.003);
    }
    return Mat(w.value);
  };
  Mat a = run(), b = run();
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("adam: non-finite gradient rejected") {
  ParameterStore store;
  Parameter& w = store.add("w", Mat::Constant(1, 1, 1.0));
  w.grad(0, 0) = std::numeric_limits<double>::infinity();
  AdamState st;
  CHECK_THROWS_AS(adam_step(store, st, 0.1), NumericError);
}

TEST_CASE("self_attention: K=1 collapses to residual value projection") {
  Rng rng(31);
  Mat x = random_mat(rng, 5, 1), wq = random_mat(rng, 5, 5), wk = random_mat(rng, 5, 5),
      wv = random_mat(rng, 5, 5);
  Tape tape;
  auto outs = self_attention<Real>({input(tape, x)}, input(tape, wq), input(tape, wk),
                                   input(tape, wv));
  REQUIRE(outs.size() == 1);
  Mat expect = x + wv * x;
  CHECK((outs[0].value() - expect).norm() < 1e-12);
}

TEST_CASE("self_attention: zero value projection passes inputs through") {
  Rng rng(37);
  Mat wq = random_mat(rng, 4, 4), wk = random_mat(rng, 4, 4), wv = Mat::Zero(4, 4);
  Tape tape;
  std::vector<Var> xs = {input(tape, random_mat(rng, 4, 1)), input(tape, random_mat(rng, 4, 1)),
                         input(tape, random_mat(rng, 4, 1))};
  auto outs = self_attention<Real>(xs, input(tape, wq), input(tape, wk), input(tape, wv));
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK((outs[i].value() - xs[i].value()).norm() < 1e-12);
}

TEST_CASE("self_attention: K=2 matches a brute-force dense-algebra oracle") {
  Rng rng(41);
  const int e = 6;
  Mat x0 = random_mat(rng, e, 1), x1 = random_mat(rng, e, 1);
  Mat wq = random_mat(rng, e, e), wk = random_mat(rng, e, e), wv = random_mat(rng, e, e);

  // Oracle: direct evaluation with plain Eigen, no tape involved.
  Mat xs(e, 2);
  xs << x0, x1;
  Mat q = wq * xs, k = wk * xs, v = wv * xs;
  Mat logits = q.transpose() * k / std::sqrt(double(e));
  Mat attn(2, 2);
  for (int r = 0; r < 2; ++r) {
    Eigen::RowVector2d row = logits.row(r);
    row = (row.array() - row.maxCoeff()).exp();
    attn.row(r) = row / row.sum();
  }
  Mat expect = xs + v * attn.transpose();

  Tape tape;
  auto outs = self_attention<Real>({input(tape, x0), input(tape, x1)}, input(tape, wq),
                                   input(tape, wk), input(tape, wv));
  CHECK((outs[0].value() - expect.col(0)).norm() < 1e-10);
  CHECK((outs[1].value() - expect.col(1)).norm() < 1e-10);
}

TEST_CASE("self_attention: equivariant under permutation of inputs") {
  Rng rng(43);
  const int e = 5, k = 4;
  Mat wq = random_mat(rng, e, e), wk = random_mat(rng, e, e), wv = random_mat(rng, e, e);
  std::vector<Mat> xs;
  for (int i = 0; i < k; ++i) xs.push_back(random_mat(rng, e, 1));
  std::vector<int> perm = {2, 0, 3, 1};

  Tape t1;
  std::vector<Var> v1;
  for (const auto& x : xs) v1.push_back(input(t1, x));
  auto out1 = self_attention<Real>(v1, input(t1, wq), input(t1, wk), input(t1, wv));

  Tape t2;
  std::vector<Var> v2;
  for (int i : perm) v2.push_back(input(t2, xs[static_cast<std::size_t>(i)]));
  auto out2 = self_attention<Real>(v2, input(t2, wq), input(t2, wk), input(t2, wv));

  for (int i = 0; i < k; ++i)
    CHECK((out2[static_cast<std::size_t>(i)].value() -
           out1[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].value())
              .norm() < 1e-10);
}

TEST_CASE("self_attention gradients match finite differences") {
  Rng rng(47);
  const int e = 4;
  Mat x0 = random_mat(rng, e, 1), x1 = random_mat(rng, e, 1), x2 = random_mat(rng, e, 1);
  Mat wq = random_mat(rng, e, e), wk = random_mat(rng, e, e), wv = random_mat(rng, e, e);
  auto build = [](Tape& t, const std::vector<Var>& xs) {
    auto outs = self_attention<Real>({xs[0], xs[1], xs[2]}, xs[3], xs[4], xs[5]);
    return mean_all(cmul(vcat(outs), vcat(outs)));
  };
  CHECK(max_rel_fd_error(build, {x0, x1, x2, wq, wk, wv}) < 1e-4);
}

TEST_CASE("softmax, relu, gelu, bias, reductions: finite differences") {
  Rng rng(53);
  for (int it = 0; it < 3; ++it) {
    Mat a = random_mat(rng, 3, 4);
    // keep relu inputs away from its kink
    a = a.unaryExpr([](double x) { return std::abs(x) < 0.05 ? x + 0.1 : x; });
    Mat b = random_mat(rng, 3, 1);
    auto build = [](Tape& t, const std::vector<Var>& xs) {
      Var y = bias_add(xs[0], xs[1]);
      Var r = relu(y);
      Var g = gelu(y);
      Var s = softmax_rows(y);
      return add(add(mean_all(r), mean_all(g)), sum_all(cmul(s, s)));
    };
    CHECK(max_rel_fd_error(build, {a, b}) < 1e-4);
  }
}

TEST_CASE("euclid_dist gradients and value") {
  Rng rng(59);
  Mat a = random_mat(rng, 5, 1), b = random_mat(rng, 5, 1);
  {
    Tape tape;
    Var d = euclid_dist(input(tape, a), input(tape, b));
    CHECK(d.value()(0, 0) == doctest::Approx((a - b).norm()));
  }
  auto build = [](Tape& t, const std::vector<Var>& xs) {
    return euclid_dist(xs[0], xs[1]);
  };
  CHECK(max_rel_fd_error(build, {a, b}) < 1e-4);
}

TEST_CASE("im2col matches a brute-force patch extraction and differentiates") {
  Rng rng(61);
  const int c = 2, h = 5, w = 6, kh = 3, kw = 3, stride = 2, pad = 1;
  auto geom = make_conv_geom(c, h, w, kh, kw, stride, pad);
  Mat x = random_mat(rng, c, h * w);

  Tape tape;
  Var patches = im2col(input(tape, x), geom);

  // Brute-force oracle with explicit loops.
  for (int oy = 0; oy < geom->out_h; ++oy)
    for (int ox = 0; ox < geom->out_w; ++ox)
      for (int cc = 0; cc < c; ++cc)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const int y = oy * stride - pad + ky, xx = ox * stride - pad + kx;
            const double expect =
                (y < 0 || y >= h || xx < 0 || xx >= w) ? 0.0 : x(cc, y * w + xx);
            const int r = (cc * kh + ky) * kw + kx;
            CHECK(patches.value()(r, oy * geom->out_w + ox) == doctest::Approx(expect));
          }

  auto build = [&](Tape& t, const std::vector<Var>& xs) {
    Var p = im2col(xs[0], geom);
    return mean_all(cmul(p, p));
  };
  CHECK(max_rel_fd_error(build, {x}) < 1e-4);
}

TEST_CASE("conv geometry rejects degenerate spatial output") {
  CHECK_THROWS_AS(make_conv_geom(1, 2, 2, 3, 3, 2, 0), ConfigError);
}

TEST_CASE("PKT1 checkpoint round-trips bit-exactly") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "mss_test_params.pkt").string();
  Rng rng(67);
  ParameterStore a;
  a.add("conv.weight", random_mat(rng, 4, 9));
  a.add("conv.bias", random_mat(rng, 4, 1));
  a.add("gem.p", Mat::Constant(1, 1, 3.0));
  a.save(path);

  ParameterStore b;
  b.add("conv.weight", Mat::Zero(4, 9));
  b.add("conv.bias", Mat::Zero(4, 1));
  b.add("gem.p", Mat::Zero(1, 1));
  b.load(path);
  for (int i = 0; i < a.size(); ++i)
    CHECK((a.at(i).value.array() == b.at(i).value.array()).all());

  ParameterStore c;
  c.add("conv.weight", Mat::Zero(4, 9));
  CHECK_THROWS_AS(c.load(path), DataError);
  fs::remove(path);
}

TEST_CASE("reshape/hcat/vcat/col/row_sum round-trip and differentiate") {
  Rng rng(71);
  Mat a = random_mat(rng, 3, 2), b = random_mat(rng, 3, 2);
  auto build = [](Tape& t, const std::vector<Var>& xs) {
    Var h = hcat(std::vector<Var>{xs[0], xs[1]});           // 3x4
    Var r = reshape(h, 12, 1);                              // stacks columns
    Var v = vcat(std::vector<Var>{xs[0], xs[1]});           // 6x2
    Var c0 = col(h, 1);
    return add(add(mean_all(cmul(r, r)), mean_all(row_sum(v))), sum_all(c0));
  };
  CHECK(max_rel_fd_error(build, {a, b}) < 1e-4);

  Tape tape;
  Var h = hcat(std::vector<Var>{input(tape, a), input(tape, b)});
  Var r = reshape(h, 12, 1);
  // column-major stacking: first column of h occupies the first 3 entries
  CHECK(r.value()(0, 0) == a(0, 0));
  CHECK(r.value()(3, 0) == a(0, 1));
  CHECK(r.value()(6, 0) == b(0, 0));
}
