#include "mssplace/encoders/bev.hpp"

#include <cmath>

#include "mssplace/core/errors.hpp"

namespace mss {

Mat voxelize_bev(const PointCloud& cloud, const BevConfig& cfg) {
  if (cfg.resolution < 4) throw ConfigError("bev: resolution must be at least 4");
  if (!(cfg.x_max > cfg.x_min) || !(cfg.y_max > cfg.y_min))
    throw ConfigError("bev: empty bounds");
  if (cfg.saturation_count < 1) throw ConfigError("bev: saturation_count must be positive");
  if (cloud.size() == 0) throw DataError("bev: empty point cloud");
  if (!cloud.xyz.allFinite()) throw NumericError("bev: non-finite point coordinates");

  const int r = cfg.resolution;
  const double sx = r / (cfg.x_max - cfg.x_min);
  const double sy = r / (cfg.y_max - cfg.y_min);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(r * r);
  Index kept = 0;
  for (Index i = 0; i < cloud.size(); ++i) {
    const double x = cloud.xyz(i, 0), y = cloud.xyz(i, 1);
    if (x < cfg.x_min || x >= cfg.x_max || y < cfg.y_min || y >= cfg.y_max) continue;
    const int cx = static_cast<int>((x - cfg.x_min) * sx);
    const int cy = static_cast<int>((y - cfg.y_min) * sy);
    ++counts(cy * r + cx);
    ++kept;
  }
  if (kept == 0) throw DataError("bev: every point lies outside the grid bounds");

  Mat grid(1, r * r);
  const double inv_sat = 1.0 / cfg.saturation_count;
  for (int i = 0; i < r * r; ++i) grid(0, i) = std::min(1.0, counts(i) * inv_sat);
  return grid;
}

ImageInput bev_image(const PointCloud& cloud, const BevConfig& cfg) {
  ImageInput img;
  img.height = cfg.resolution;
  img.width = cfg.resolution;
  img.channels = 1;
  img.values = voxelize_bev(cloud, cfg);
  return img;
}

}  // namespace mss
