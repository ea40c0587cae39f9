#include "mssplace/synth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mssplace/core/serial.hpp"

namespace fs = std::filesystem;

namespace mss {

std::vector<int> Dataset::traversal_indices() const {
  std::set<int> t;
  for (const auto& s : samples) t.insert(s.traversal);
  return {t.begin(), t.end()};
}

Mat Dataset::positions() const {
  Mat p(size(), 2);
  for (Index i = 0; i < size(); ++i) {
    p(i, 0) = samples[static_cast<std::size_t>(i)].x;
    p(i, 1) = samples[static_cast<std::size_t>(i)].y;
  }
  return p;
}

namespace {

bool images_equal(const ImageInput& a, const ImageInput& b) {
  return a.height == b.height && a.width == b.width && a.channels == b.channels &&
         a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
         (a.values.array() == b.values.array()).all();
}

}  // namespace

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.cameras != b.cameras || a.mask_classes != b.mask_classes || a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& sa = a.samples[i];
    const auto& sb = b.samples[i];
    if (sa.id != sb.id || sa.traversal != sb.traversal || sa.x != sb.x || sa.y != sb.y)
      return false;
    if (sa.images.size() != sb.images.size() || sa.masks.size() != sb.masks.size() ||
        sa.texts != sb.texts)
      return false;
    for (std::size_t k = 0; k < sa.images.size(); ++k)
      if (!images_equal(sa.images[k], sb.images[k])) return false;
    for (std::size_t k = 0; k < sa.masks.size(); ++k)
      if (!images_equal(sa.masks[k], sb.masks[k])) return false;
    if (sa.cloud.xyz.rows() != sb.cloud.xyz.rows()) return false;
    if (sa.cloud.size() > 0 && !(sa.cloud.xyz.array() == sb.cloud.xyz.array()).all())
      return false;
  }
  return true;
}

void save_img1(const std::string& path, const ImageInput& img, bool denormalize) {
  img.validate();
  auto os = serial::open_out(path);
  serial::write_bytes(os, "IMG1", 4);
  serial::write_u64(os, static_cast<std::uint64_t>(img.height));
  serial::write_u64(os, static_cast<std::uint64_t>(img.width));
  serial::write_u64(os, static_cast<std::uint64_t>(img.channels));
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.values.size()));
  std::size_t n = 0;
  for (int c = 0; c < img.channels; ++c)
    for (Index s = 0; s < img.values.cols(); ++s) {
      const double v = img.values(c, s);
      const double scaled = denormalize ? std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5) : v;
      if (scaled < 0.0 || scaled > 255.0)
        throw DataError("img1: value out of byte range while writing " + path);
      bytes[n++] = static_cast<unsigned char>(scaled);
    }
  serial::write_bytes(os, bytes.data(), bytes.size());
  if (!os) throw DataError("write failed: " + path);
}

ImageInput load_img1(const std::string& path, bool normalize) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "IMG1", "IMG1 raster");
  ImageInput img;
  img.height = static_cast<int>(serial::read_u64(is, "height"));
  img.width = static_cast<int>(serial::read_u64(is, "width"));
  img.channels = static_cast<int>(serial::read_u64(is, "channels"));
  if (img.height <= 0 || img.width <= 0 || (img.channels != 1 && img.channels != 3))
    throw DataError("img1: implausible dimensions in " + path);
  const std::size_t n =
      static_cast<std::size_t>(img.height) * img.width * static_cast<std::size_t>(img.channels);
  std::vector<unsigned char> bytes(n);
  serial::read_bytes(is, bytes.data(), n, "raster bytes");
  img.values.resize(img.channels, static_cast<Index>(img.height) * img.width);
  std::size_t i = 0;
  const double scale = normalize ? 1.0 / 255.0 : 1.0;
  for (int c = 0; c < img.channels; ++c)
    for (Index s = 0; s < img.values.cols(); ++s) img.values(c, s) = bytes[i++] * scale;
  return img;
}

void save_pcd1(const std::string& path, const PointCloud& cloud) {
  auto os = serial::open_out(path);
  serial::write_bytes(os, "PCD1", 4);
  serial::write_u64(os, static_cast<std::uint64_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) {
    serial::write_f64(os, cloud.xyz(i, 0));
    serial::write_f64(os, cloud.xyz(i, 1));
    serial::write_f64(os, cloud.xyz(i, 2));
  }
  if (!os) throw DataError("write failed: " + path);
}

PointCloud load_pcd1(const std::string& path) {
  auto is = serial::open_in(path);
  serial::expect_magic(is, "PCD1", "PCD1 point cloud");
  const auto n = static_cast<Index>(serial::read_u64(is, "point count"));
  PointCloud cloud;
  cloud.xyz.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    cloud.xyz(i, 0) = serial::read_f64(is, "x");
    cloud.xyz(i, 1) = serial::read_f64(is, "y");
    cloud.xyz(i, 2) = serial::read_f64(is, "z");
  }
  return cloud;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "payload");
  std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::trunc);
  if (!manifest) throw DataError("cannot write manifest in " + dir);
  manifest << "# cameras=" << dataset.cameras << ",mask_classes=" << dataset.mask_classes << "\n";
  manifest << "id,traversal,x,y,images,masks,cloud,texts\n";
  for (const auto& s : dataset.samples) {
    std::vector<std::string> img_paths, mask_paths;
    for (std::size_t k = 0; k < s.images.size(); ++k) {
      std::string rel = "payload/" + s.id + "_img" + std::to_string(k) + ".img";
      save_img1((fs::path(dir) / rel).string(), s.images[k], true);
      img_paths.push_back(rel);
    }
    for (std::size_t k = 0; k < s.masks.size(); ++k) {
      std::string rel = "payload/" + s.id + "_mask" + std::to_string(k) + ".img";
      save_img1((fs::path(dir) / rel).string(), s.masks[k], false);
      mask_paths.push_back(rel);
    }
    std::string cloud_rel;
    if (s.has_cloud()) {
      cloud_rel = "payload/" + s.id + ".pcd";
      save_pcd1((fs::path(dir) / cloud_rel).string(), s.cloud);
    }
    std::string text_rel;
    if (s.has_texts()) {
      text_rel = "payload/" + s.id + ".txt";
      std::ofstream tf(fs::path(dir) / text_rel, std::ios::trunc | std::ios::binary);
      if (!tf) throw DataError("cannot write text payload for " + s.id);
      for (const auto& line : s.texts) tf << line << "\n";
    }
    manifest << s.id << ',' << s.traversal << ',' << fmt_double(s.x) << ',' << fmt_double(s.y)
             << ',' << join(img_paths, ';') << ',' << join(mask_paths, ';') << ',' << cloud_rel
             << ',' << text_rel << "\n";
  }
  if (!manifest) throw DataError("manifest write failed in " + dir);
}

Dataset load_real_dataset(const std::string& manifest_path, bool skip_incomplete) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  Dataset dataset;
  std::string line;
  std::set<std::string> seen_ids;
  bool header_done = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& kv : split(line.substr(1), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        std::string key = kv.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        if (key == "cameras") dataset.cameras = std::stoi(kv.substr(eq + 1));
        if (key == "mask_classes") dataset.mask_classes = std::stoi(kv.substr(eq + 1));
      }
      continue;
    }
    if (!header_done) {
      header_done = true;  // column header row
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 8)
      throw DataError("manifest row " + std::to_string(lineno) + ": expected 8 columns, got " +
                      std::to_string(cols.size()));
    PlaceSample s;
    s.id = cols[0];
    if (s.id.empty()) throw DataError("manifest row " + std::to_string(lineno) + ": empty id");
    if (!seen_ids.insert(s.id).second)
      throw DataError("manifest: duplicate sample id: " + s.id);
    try {
      s.traversal = std::stoi(cols[1]);
      s.x = std::stod(cols[2]);
      s.y = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw DataError("manifest row " + std::to_string(lineno) + ": malformed numeric field");
    }

    auto missing = [&](const std::string& rel) { return !fs::exists(base / rel); };
    bool incomplete = false;
    std::vector<std::string> img_rels, mask_rels;
    if (!cols[4].empty()) img_rels = split(cols[4], ';');
    if (!cols[5].empty()) mask_rels = split(cols[5], ';');
    for (const auto& rel : img_rels)
      if (missing(rel)) {
        if (skip_incomplete) incomplete = true;
        else throw DataError("missing image payload: " + (base / rel).string());
      }
    for (const auto& rel : mask_rels)
      if (missing(rel)) {
        if (skip_incomplete) incomplete = true;
        else throw DataError("missing mask payload: " + (base / rel).string());
      }
    if (!cols[6].empty() && missing(cols[6])) {
      if (skip_incomplete) incomplete = true;
      else throw DataError("missing cloud payload: " + (base / cols[6]).string());
    }
    if (!cols[7].empty() && missing(cols[7])) {
      if (skip_incomplete) incomplete = true;
      else throw DataError("missing text payload: " + (base / cols[7]).string());
    }
    if (incomplete) continue;

    for (const auto& rel : img_rels) s.images.push_back(load_img1((base / rel).string(), true));
    for (const auto& rel : mask_rels) s.masks.push_back(load_img1((base / rel).string(), false));
    if (!cols[6].empty()) s.cloud = load_pcd1((base / cols[6]).string());
    if (!cols[7].empty()) {
      std::ifstream tf(base / cols[7], std::ios::binary);
      if (!tf) throw DataError("cannot open text payload: " + (base / cols[7]).string());
      std::string tline;
      while (std::getline(tf, tline)) s.texts.push_back(tline);
    }
    dataset.samples.push_back(std::move(s));
  }
  if (dataset.samples.empty()) throw DataError("manifest has no usable samples: " + manifest_path);
  if (dataset.cameras == 0)
    for (const auto& s : dataset.samples)
      dataset.cameras = std::max(dataset.cameras, static_cast<int>(s.images.size()));
  if (dataset.mask_classes == 0) {
    double max_id = 0.0;
    for (const auto& s : dataset.samples)
      for (const auto& m : s.masks) max_id = std::max(max_id, m.values.maxCoeff());
    dataset.mask_classes = static_cast<int>(max_id) + 1;
  }
  return dataset;
}

std::pair<Dataset, Dataset> split_database_queries(const Dataset& dataset, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split: ratio must lie in (0,1)");
  const auto traversals = dataset.traversal_indices();
  const int t = static_cast<int>(traversals.size());
  if (t < 2) throw ConfigError("split: need at least two traversals, got " + std::to_string(t));
  const int n_db = std::clamp(static_cast<int>(std::floor(ratio * t)), 1, t - 1);
  std::set<int> db_set(traversals.begin(), traversals.begin() + n_db);

  Dataset db, query;
  db.cameras = query.cameras = dataset.cameras;
  db.mask_classes = query.mask_classes = dataset.mask_classes;
  for (const auto& s : dataset.samples)
    (db_set.count(s.traversal) ? db : query).samples.push_back(s);
  return {std::move(db), std::move(query)};
}

}  // namespace mss
