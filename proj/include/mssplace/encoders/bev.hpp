#pragma once

#include "mssplace/core/types.hpp"
#include "mssplace/encoders/cnn.hpp"

namespace mss {

// LiDAR scan in the vehicle frame, meters. One row per point (x, y, z).
struct PointCloud {
  Mat xyz;  // n x 3

  Index size() const { return xyz.rows(); }
};

struct BevConfig {
  double x_min = -20.0, x_max = 20.0;
  double y_min = -20.0, y_max = 20.0;
  int resolution = 64;
  int saturation_count = 5;
};

// Top-down occupancy raster: cell value = min(1, count/saturation_count).
// z is discarded; points outside the bounds are dropped; a cloud that lands
// entirely outside the bounds is an error.
Mat voxelize_bev(const PointCloud& cloud, const BevConfig& config);

// The grid packaged as a 1-channel raster for the point-cloud CNN branch.
ImageInput bev_image(const PointCloud& cloud, const BevConfig& config);

}  // namespace mss
