#include "mssplace/encoders/pca.hpp"

#include <Eigen/Eigenvalues>
#include <iostream>

#include "mssplace/core/serial.hpp"

namespace mss {

PcaModel fit_pca(const Mat& rows, int k) {
  const Index n = rows.rows(), d = rows.cols();
  if (k <= 0) throw ConfigError("pca: component count must be positive");
  if (n < k || d < k)
    throw ConfigError("pca: need at least k samples and k input dimensions (n=" +
                      std::to_string(n) + ", d=" + std::to_string(d) +
                      ", k=" + std::to_string(k) + ")");
  if (!rows.allFinite()) throw NumericError("pca: non-finite input");

  PcaModel model;
  model.mean = rows.colwise().mean();
  Mat centered = rows.rowwise() - model.mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

  // Eigenvalues ascend; take the top k in descending order.
  model.components.resize(k, d);
  model.explained_variance.resize(k);
  const double tol = 1e-12 * std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  int nonzero = 0;
  for (int i = 0; i < k; ++i) {
    const Index src = d - 1 - i;
    Vec comp = solver.eigenvectors().col(src);
    Index arg = 0;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp(arg) < 0.0) comp = -comp;
    model.components.row(i) = comp.transpose();
    const double var = std::max(0.0, solver.eigenvalues()(src));
    model.explained_variance(i) = var < tol ? 0.0 : var;
    if (model.explained_variance(i) > 0.0) ++nonzero;
  }
  if (nonzero < k) {
    model.rank_deficient = true;
    std::cerr << "warning: pca fit is rank deficient (" << nonzero << " of " << k
              << " components carry variance)\n";
  }
  return model;
}

Vec project_pca(const PcaModel& model, const Vec& v) {
  if (!model.fitted()) throw ConfigError("pca: projection with an unfitted model");
  if (v.size() != model.input_dim()) throw ShapeError("pca: input dimension mismatch");
  return model.components * (v - model.mean);
}

void PcaModel::save(const std::string& path) const {
  auto os = serial::open_out(path);
  serial::write_bytes(os, "PCM1", 4);
  serial::write_u64(os, static_cast<std::uint64_t>(input_dim()));
  serial::write_u64(os, static_cast<std::uint64_t>(output_dim()));
  serial::write_u64(os, rank_deficient ? 1 : 0);
  for (Index i = 0; i < mean.size(); ++i) serial::write_f64(os, mean(i));
  for (Index r = 0; r < components.rows(); ++r)
    for (Index c = 0; c < components.cols(); ++c) serial::write_f64(os, components(r, c));
  for (Index i = 0; i < explained_variance.size(); ++i)
    serial::write_f64(os, explained_variance(i));
  if (!os) throw DataError("write failed: " + path);
}

PcaModel PcaModel::load(const std::string& path) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "PCM1", "PCM1 pca model");
  PcaModel model;
  const auto d = static_cast<Index>(serial::read_u64(is, "input dim"));
  const auto k = static_cast<Index>(serial::read_u64(is, "component count"));
  model.rank_deficient = serial::read_u64(is, "rank flag") != 0;
  model.mean.resize(d);
  for (Index i = 0; i < d; ++i) model.mean(i) = serial::read_f64(is, "mean");
  model.components.resize(k, d);
  for (Index r = 0; r < k; ++r)
    for (Index c = 0; c < d; ++c) model.components(r, c) = serial::read_f64(is, "component");
  model.explained_variance.resize(k);
  for (Index i = 0; i < k; ++i) model.explained_variance(i) = serial::read_f64(is, "variance");
  return model;
}

}  // namespace mss
