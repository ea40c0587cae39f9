#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mssplace/encoders/bev.hpp"
#include "mssplace/encoders/cnn.hpp"

namespace mss {

// One timestamped observation of a place. Camera-borne payloads (images,
// masks, texts) have one entry per camera. Images hold values in [0,1];
// masks hold raw class ids (the model normalizes by its class count).
struct PlaceSample {
  std::string id;
  int traversal = 0;
  double x = 0.0;
  double y = 0.0;
  std::vector<ImageInput> images;
  std::vector<ImageInput> masks;
  PointCloud cloud;
  std::vector<std::string> texts;

  bool has_images() const { return !images.empty(); }
  bool has_masks() const { return !masks.empty(); }
  bool has_cloud() const { return cloud.size() > 0; }
  bool has_texts() const { return !texts.empty(); }
};

struct Dataset {
  int cameras = 0;
  int mask_classes = 0;
  std::vector<PlaceSample> samples;

  Index size() const { return static_cast<Index>(samples.size()); }
  std::vector<int> traversal_indices() const;
  Mat positions() const;  // size x 2
};

bool datasets_equal(const Dataset& a, const Dataset& b);

// Raster payload container (IMG1): u64 height, width, channels, then 8-bit
// values stored planar (all of channel 0, then channel 1, ...), row-major
// within a channel. `normalize` maps bytes to [0,1] by /255 (RGB images);
// masks load raw.
void save_img1(const std::string& path, const ImageInput& img, bool denormalize);
ImageInput load_img1(const std::string& path, bool normalize);

// Point cloud container (PCD1): u64 count then xyz as f64 LE per point.
void save_pcd1(const std::string& path, const PointCloud& cloud);
PointCloud load_pcd1(const std::string& path);

// Dataset directory: manifest.csv (id, traversal, x, y, images, masks,
// cloud, texts; multi-paths ';'-separated, paths relative to the manifest)
// plus payload files. Texts live in one UTF-8 file per sample, one line per
// camera.
void save_dataset(const Dataset& dataset, const std::string& dir);

// skip_incomplete: silently drop manifest rows with missing payload files
// instead of failing.
Dataset load_real_dataset(const std::string& manifest_path, bool skip_incomplete = false);

// Disjoint traversal split: the first floor(ratio * T) traversals (at least
// 1, at most T-1) become the database side, the rest the query side.
std::pair<Dataset, Dataset> split_database_queries(const Dataset& dataset, double ratio = 0.7);

}  // namespace mss
