#include "mssplace/synth/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mssplace/core/rng.hpp"

namespace mss {

namespace {

constexpr std::uint64_t kStreamLayout = 0x4c41594f55ull;
constexpr std::uint64_t kStreamGeometry = 0x47454f4dull;
constexpr std::uint64_t kStreamAppearance = 0x41505045ull;
constexpr std::uint64_t kStreamSample = 0x53414d50ull;
constexpr std::uint64_t kStreamVocab = 0x574f5244ull;

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

struct LandmarkGeom {
  double angle = 0.0;      // radians, world frame
  double range = 0.0;      // meters from the place center
  double height = 0.0;     // meters
  double halfwidth = 0.0;  // radians of angular extent
  Mat scatter;             // n x 3 point offsets around the landmark base
};

struct GeometryLatent {
  std::vector<LandmarkGeom> landmarks;
};

struct AppearanceLatent {
  std::vector<Eigen::Vector3d> colors;  // per landmark
  std::vector<int> types;               // per landmark, 1..mask_classes-1
  Eigen::Vector3d ground, sky;
};

GeometryLatent make_geometry(const WorldConfig& cfg, int geometry_id) {
  Rng rng(Rng::derive(cfg.seed, kStreamGeometry * 1000003ull +
                                    static_cast<std::uint64_t>(geometry_id)));
  GeometryLatent g;
  const int n = cfg.landmarks_per_place;
  g.landmarks.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    LandmarkGeom& lm = g.landmarks[static_cast<std::size_t>(j)];
    lm.angle = 2.0 * M_PI * (j + rng.uniform(0.15, 0.85)) / n - M_PI;
    lm.range = rng.uniform(5.0, 16.0);
    lm.height = rng.uniform(2.0, 6.0);
    lm.halfwidth = rng.uniform(0.12, 0.30);
    const int pts = 14 + static_cast<int>(3.0 * lm.height);
    lm.scatter.resize(pts, 3);
    for (int i = 0; i < pts; ++i) {
      lm.scatter(i, 0) = rng.normal(0.0, 0.55);
      lm.scatter(i, 1) = rng.normal(0.0, 0.55);
      lm.scatter(i, 2) = rng.uniform(0.0, lm.height);
    }
  }
  return g;
}

AppearanceLatent make_appearance(const WorldConfig& cfg, int appearance_id) {
  Rng rng(Rng::derive(cfg.seed, kStreamAppearance * 1000003ull +
                                    static_cast<std::uint64_t>(appearance_id)));
  AppearanceLatent a;
  a.colors.resize(static_cast<std::size_t>(cfg.landmarks_per_place));
  a.types.resize(static_cast<std::size_t>(cfg.landmarks_per_place));
  for (int j = 0; j < cfg.landmarks_per_place; ++j) {
    a.colors[static_cast<std::size_t>(j)] =
        Eigen::Vector3d(rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95),
                        rng.uniform(0.15, 0.95));
    a.types[static_cast<std::size_t>(j)] = rng.uniform_int(1, cfg.mask_classes - 1);
  }
  a.ground = Eigen::Vector3d(rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.35),
                             rng.uniform(0.05, 0.35));
  a.sky = Eigen::Vector3d(rng.uniform(0.45, 0.75), rng.uniform(0.45, 0.75),
                          rng.uniform(0.55, 0.85));
  return a;
}

// Nearest landmark whose angular footprint covers the ray, if any.
int covering_landmark(const GeometryLatent& g, double phi) {
  int best = -1;
  double best_abs = 1e9;
  for (std::size_t j = 0; j < g.landmarks.size(); ++j) {
    const double d = std::abs(wrap_angle(phi - g.landmarks[j].angle));
    if (d <= g.landmarks[j].halfwidth && d < best_abs) {
      best_abs = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

double quantize_byte(double v) {
  return std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5) / 255.0;
}

}  // namespace

void WorldConfig::validate() const {
  if (num_places < 2) throw ConfigError("world: num_places must be at least 2");
  if (traversals < 2) throw ConfigError("world: need at least 2 traversals");
  if (cameras < 1 || cameras > 5) throw ConfigError("world: cameras must lie in 1..5");
  if (image_size < 8) throw ConfigError("world: image_size must be at least 8");
  if (mask_classes < 2 || mask_classes > 255)
    throw ConfigError("world: mask_classes must lie in 2..255");
  if (landmarks_per_place < 1) throw ConfigError("world: need at least one landmark");
  if (vocabulary_size < 8) throw ConfigError("world: vocabulary too small");
  if (!(area_side > 0.0)) throw ConfigError("world: area side must be positive");
  for (double v : {image_noise, mask_noise, cloud_noise, text_dropout, viewpoint_jitter_deg,
                   position_noise})
    if (v < 0.0) throw ConfigError("world: noise levels must be nonnegative");
  if (appearance_alias_fraction < 0.0 || appearance_alias_fraction > 1.0 ||
      geometry_alias_fraction < 0.0 || geometry_alias_fraction > 1.0)
    throw ConfigError("world: alias fractions must lie in [0,1]");
  const int half = num_places / 2;
  const int n_a = static_cast<int>(std::floor(appearance_alias_fraction * num_places / 2.0));
  const int n_g = static_cast<int>(std::floor(geometry_alias_fraction * num_places / 2.0));
  if (n_a + n_g > half)
    throw ConfigError("world: alias fractions overlap; appearance + geometry must be <= 1");
}

std::vector<std::string> make_vocabulary(int size, std::uint64_t seed) {
  static const char* consonants[] = {"b", "d", "f", "g", "k", "l", "m",
                                     "n", "p", "r", "s", "t", "v", "z"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  Rng rng(Rng::derive(seed, kStreamVocab));
  std::set<std::string> seen;
  std::vector<std::string> vocab;
  vocab.reserve(static_cast<std::size_t>(size));
  while (static_cast<int>(vocab.size()) < size) {
    std::string w;
    const int syllables = rng.uniform_int(2, 3);
    for (int s = 0; s < syllables; ++s) {
      w += consonants[rng.uniform_int(0, 13)];
      w += vowels[rng.uniform_int(0, 4)];
    }
    if (!seen.insert(w).second) continue;
    vocab.push_back(std::move(w));
  }
  return vocab;
}

Dataset generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const int p_count = cfg.num_places;
  const int half = p_count / 2;
  const int n_apairs = static_cast<int>(std::floor(cfg.appearance_alias_fraction * p_count / 2.0));
  const int n_gpairs = static_cast<int>(std::floor(cfg.geometry_alias_fraction * p_count / 2.0));

  // Latent factor assignment; alias partners sit half the index range apart,
  // so their map positions are far beyond the negative radius.
  std::vector<int> appearance_id(static_cast<std::size_t>(p_count)),
      geometry_id(static_cast<std::size_t>(p_count));
  for (int i = 0; i < p_count; ++i) {
    appearance_id[static_cast<std::size_t>(i)] =
        (i >= half && i - half < n_apairs) ? i - half : i;
    geometry_id[static_cast<std::size_t>(i)] =
        (i >= p_count - n_gpairs) ? i - half : i;
  }

  // Grid layout with jitter; separation stays above the negative radius.
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p_count))));
  const double cell = cfg.area_side / grid;
  Rng layout_rng(Rng::derive(cfg.seed, kStreamLayout));
  std::vector<double> base_x(static_cast<std::size_t>(p_count)),
      base_y(static_cast<std::size_t>(p_count));
  for (int i = 0; i < p_count; ++i) {
    const int row = i / grid, col = i % grid;
    base_x[static_cast<std::size_t>(i)] =
        (col + 0.5) * cell + layout_rng.uniform(-0.15 * cell, 0.15 * cell);
    base_y[static_cast<std::size_t>(i)] =
        (row + 0.5) * cell + layout_rng.uniform(-0.15 * cell, 0.15 * cell);
  }

  std::vector<GeometryLatent> geoms;
  std::vector<AppearanceLatent> looks;
  geoms.reserve(static_cast<std::size_t>(p_count));
  looks.reserve(static_cast<std::size_t>(p_count));
  for (int i = 0; i < p_count; ++i) {
    geoms.push_back(make_geometry(cfg, geometry_id[static_cast<std::size_t>(i)]));
    looks.push_back(make_appearance(cfg, appearance_id[static_cast<std::size_t>(i)]));
  }

  const auto vocab = make_vocabulary(cfg.vocabulary_size, cfg.seed);
  const double sector = 2.0 * M_PI / cfg.cameras;
  const int h = cfg.image_size, w = cfg.image_size;
  const int ground_rows = std::max(1, static_cast<int>(std::floor(0.25 * h)));

  Dataset dataset;
  dataset.cameras = cfg.cameras;
  dataset.mask_classes = cfg.mask_classes;
  dataset.samples.reserve(static_cast<std::size_t>(p_count) * cfg.traversals);

  for (int t = 0; t < cfg.traversals; ++t) {
    for (int p = 0; p < p_count; ++p) {
      const GeometryLatent& geom = geoms[static_cast<std::size_t>(p)];
      const AppearanceLatent& look = looks[static_cast<std::size_t>(p)];
      Rng rng(Rng::derive(cfg.seed, kStreamSample * 1000003ull +
                                        static_cast<std::uint64_t>(p) * 1000ull +
                                        static_cast<std::uint64_t>(t)));
      PlaceSample s;
      {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "p%04d_t%d", p, t);
        s.id = buf;
      }
      s.traversal = t;

      const int rot = rng.uniform_int(0, cfg.cameras - 1);
      const double jitter = (cfg.viewpoint_jitter_deg * M_PI / 180.0) * rng.normal();
      const double heading = (cfg.random_heading ? rot * sector : 0.0) + jitter;

      s.x = base_x[static_cast<std::size_t>(p)] + cfg.position_noise * rng.normal();
      s.y = base_y[static_cast<std::size_t>(p)] + cfg.position_noise * rng.normal();

      // Effective mask classes for this sample (swap noise).
      std::vector<int> eff_type(geom.landmarks.size());
      for (std::size_t j = 0; j < geom.landmarks.size(); ++j) {
        const bool swap = rng.uniform() < cfg.mask_noise;
        const int replacement = rng.uniform_int(1, cfg.mask_classes - 1);
        eff_type[j] = swap ? replacement : look.types[j];
      }

      for (int cam = 0; cam < cfg.cameras; ++cam) {
        const double cam_center = heading + cam * sector;
        ImageInput img;
        img.height = h;
        img.width = w;
        img.channels = 3;
        img.values.resize(3, static_cast<Index>(h) * w);
        ImageInput mask;
        mask.height = h;
        mask.width = w;
        mask.channels = 1;
        mask.values.resize(1, static_cast<Index>(h) * w);

        const double brightness =
            std::clamp(1.0 + cfg.image_noise * 0.25 * rng.normal(), 0.6, 1.4);
        std::vector<int> column_lm(static_cast<std::size_t>(w));
        for (int x = 0; x < w; ++x) {
          const double phi = cam_center - sector / 2.0 + (x + 0.5) * sector / w;
          column_lm[static_cast<std::size_t>(x)] = covering_landmark(geom, phi);
        }
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const Index sidx = static_cast<Index>(y) * w + x;
            const int j = column_lm[static_cast<std::size_t>(x)];
            Eigen::Vector3d color;
            int cls = 0;
            const int bar_rows =
                j < 0 ? 0
                      : std::min(h, static_cast<int>(std::floor(
                                        h * std::min(0.85, geom.landmarks[static_cast<std::size_t>(
                                                               j)].height /
                                                               7.0) +
                                        0.5)));
            if (j >= 0 && y >= h - bar_rows) {
              const auto& lm = geom.landmarks[static_cast<std::size_t>(j)];
              const double dim = 1.0 - lm.range / 45.0;
              color = look.colors[static_cast<std::size_t>(j)] * dim;
              cls = eff_type[static_cast<std::size_t>(j)];
            } else if (y >= h - ground_rows) {
              color = look.ground;
            } else {
              color = look.sky;
            }
            for (int c = 0; c < 3; ++c) {
              const double noisy =
                  color(c) * brightness + cfg.image_noise * 0.15 * rng.normal();
              img.values(c, sidx) = quantize_byte(noisy);
            }
            mask.values(0, sidx) = static_cast<double>(cls);
          }
        }
        s.images.push_back(std::move(img));
        s.masks.push_back(std::move(mask));
      }

      // Point cloud in the vehicle frame: landmark scatters rotated by the
      // heading, with per-traversal jitter and dropout.
      {
        std::vector<Eigen::Vector3d> pts;
        const double c = std::cos(-heading), sn = std::sin(-heading);
        for (std::size_t j = 0; j < geom.landmarks.size(); ++j) {
          const auto& lm = geom.landmarks[j];
          const double bx = lm.range * std::cos(lm.angle);
          const double by = lm.range * std::sin(lm.angle);
          for (Index i = 0; i < lm.scatter.rows(); ++i) {
            const double wx = bx + lm.scatter(i, 0) + cfg.cloud_noise * rng.normal();
            const double wy = by + lm.scatter(i, 1) + cfg.cloud_noise * rng.normal();
            const double wz = lm.scatter(i, 2) + 0.3 * cfg.cloud_noise * rng.normal();
            const bool keep = rng.uniform() >= cfg.cloud_noise * 0.3;
            if (!keep) continue;
            pts.emplace_back(c * wx - sn * wy, sn * wx + c * wy, wz);
          }
        }
        if (pts.empty()) pts.emplace_back(1.0, 0.0, 0.0);  // unreachable in practice
        s.cloud.xyz.resize(static_cast<Index>(pts.size()), 3);
        for (std::size_t i = 0; i < pts.size(); ++i) s.cloud.xyz.row(static_cast<Index>(i)) = pts[i];
      }

      // Texts: one line per camera, two words per visible landmark (a class
      // word shared across places plus a place-specific word), with dropout.
      for (int cam = 0; cam < cfg.cameras; ++cam) {
        const double cam_center = heading + cam * sector;
        std::vector<std::pair<double, std::size_t>> visible;
        for (std::size_t j = 0; j < geom.landmarks.size(); ++j) {
          const double rel = wrap_angle(geom.landmarks[j].angle - cam_center);
          if (std::abs(rel) <= sector / 2.0) visible.emplace_back(rel, j);
        }
        std::sort(visible.begin(), visible.end());
        std::string line;
        const int a_id = appearance_id[static_cast<std::size_t>(p)];
        const int g_id = geometry_id[static_cast<std::size_t>(p)];
        for (const auto& [rel, j] : visible) {
          const int type_word = (look.types[j] * 7 + 1) % cfg.vocabulary_size;
          const int place_word =
              (a_id * 131 + g_id * 57 + static_cast<int>(j) * 17) % cfg.vocabulary_size;
          for (int wi : {type_word, place_word}) {
            const bool keep = rng.uniform() >= cfg.text_dropout;
            if (!keep) continue;
            if (!line.empty()) line.push_back(' ');
            line += vocab[static_cast<std::size_t>(wi)];
          }
        }
        s.texts.push_back(std::move(line));
      }

      dataset.samples.push_back(std::move(s));
    }
  }
  return dataset;
}

}  // namespace mss
