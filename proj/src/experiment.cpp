#include "mssplace/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mssplace/core/rng.hpp"

using nlohmann::json;

namespace mss {

namespace {

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

json world_to_json(const WorldConfig& w) {
  return json{{"num_places", w.num_places},
              {"area_side", w.area_side},
              {"traversals", w.traversals},
              {"cameras", w.cameras},
              {"image_size", w.image_size},
              {"mask_classes", w.mask_classes},
              {"landmarks_per_place", w.landmarks_per_place},
              {"vocabulary_size", w.vocabulary_size},
              {"image_noise", w.image_noise},
              {"mask_noise", w.mask_noise},
              {"cloud_noise", w.cloud_noise},
              {"text_dropout", w.text_dropout},
              {"viewpoint_jitter_deg", w.viewpoint_jitter_deg},
              {"position_noise", w.position_noise},
              {"random_heading", w.random_heading},
              {"appearance_alias_fraction", w.appearance_alias_fraction},
              {"geometry_alias_fraction", w.geometry_alias_fraction},
              {"seed", w.seed}};
}

void world_from_json(const json& j, WorldConfig& w) {
  get_to(j, "num_places", w.num_places);
  get_to(j, "area_side", w.area_side);
  get_to(j, "traversals", w.traversals);
  get_to(j, "cameras", w.cameras);
  get_to(j, "image_size", w.image_size);
  get_to(j, "mask_classes", w.mask_classes);
  get_to(j, "landmarks_per_place", w.landmarks_per_place);
  get_to(j, "vocabulary_size", w.vocabulary_size);
  get_to(j, "image_noise", w.image_noise);
  get_to(j, "mask_noise", w.mask_noise);
  get_to(j, "cloud_noise", w.cloud_noise);
  get_to(j, "text_dropout", w.text_dropout);
  get_to(j, "viewpoint_jitter_deg", w.viewpoint_jitter_deg);
  get_to(j, "position_noise", w.position_noise);
  get_to(j, "random_heading", w.random_heading);
  get_to(j, "appearance_alias_fraction", w.appearance_alias_fraction);
  get_to(j, "geometry_alias_fraction", w.geometry_alias_fraction);
  get_to(j, "seed", w.seed);
}

json model_to_json(const ModelConfig& m) {
  return json{{"modalities", m.modalities},
              {"camera_set", m.camera_set},
              {"dataset_cameras", m.dataset_cameras},
              {"fusion", m.fusion},
              {"text_fusion", m.text_fusion},
              {"embedding_dim", m.embedding_dim},
              {"image_widths", m.image_widths},
              {"mask_widths", m.mask_widths},
              {"cloud_widths", m.cloud_widths},
              {"mask_classes", m.mask_classes},
              {"bev_range", m.bev.x_max},
              {"bev_resolution", m.bev.resolution},
              {"bev_saturation", m.bev.saturation_count},
              {"text_pca_components", m.text_pca_components},
              {"external_text_embeddings", m.external_text_embeddings},
              {"l2_normalize_segments", m.l2_normalize_segments},
              {"gem_p_init", m.gem_p_init},
              {"gem_eps", m.gem_eps},
              {"init_seed", m.init_seed}};
}

void model_from_json(const json& j, ModelConfig& m) {
  get_to(j, "modalities", m.modalities);
  get_to(j, "camera_set", m.camera_set);
  get_to(j, "dataset_cameras", m.dataset_cameras);
  get_to(j, "fusion", m.fusion);
  get_to(j, "text_fusion", m.text_fusion);
  get_to(j, "embedding_dim", m.embedding_dim);
  get_to(j, "image_widths", m.image_widths);
  get_to(j, "mask_widths", m.mask_widths);
  get_to(j, "cloud_widths", m.cloud_widths);
  get_to(j, "mask_classes", m.mask_classes);
  if (j.contains("bev_range")) {
    const double r = j.at("bev_range").get<double>();
    m.bev.x_min = m.bev.y_min = -r;
    m.bev.x_max = m.bev.y_max = r;
  }
  get_to(j, "bev_resolution", m.bev.resolution);
  get_to(j, "bev_saturation", m.bev.saturation_count);
  get_to(j, "text_pca_components", m.text_pca_components);
  get_to(j, "external_text_embeddings", m.external_text_embeddings);
  get_to(j, "l2_normalize_segments", m.l2_normalize_segments);
  get_to(j, "gem_p_init", m.gem_p_init);
  get_to(j, "gem_eps", m.gem_eps);
  get_to(j, "init_seed", m.init_seed);
}

json train_to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"seed", t.seed},
              {"margin", t.margin},
              {"r_pos", t.r_pos},
              {"r_neg", t.r_neg},
              {"lr_image", t.lr.base_image},
              {"lr_cloud", t.lr.base_cloud},
              {"lr_text", t.lr.base_text},
              {"lr_mask", t.lr.base_mask},
              {"lr_milestones", t.lr.milestones},
              {"lr_factor", t.lr.factor},
              {"batch_initial", t.batch.initial},
              {"batch_growth", t.batch.growth},
              {"batch_max", t.batch.max},
              {"zero_loss_threshold", t.batch.zero_loss_threshold},
              {"split_ratio", t.split_ratio},
              {"train_on", t.train_on}};
}

void train_from_json(const json& j, TrainConfig& t) {
  get_to(j, "epochs", t.epochs);
  get_to(j, "seed", t.seed);
  get_to(j, "margin", t.margin);
  get_to(j, "r_pos", t.r_pos);
  get_to(j, "r_neg", t.r_neg);
  get_to(j, "lr_image", t.lr.base_image);
  get_to(j, "lr_cloud", t.lr.base_cloud);
  get_to(j, "lr_text", t.lr.base_text);
  get_to(j, "lr_mask", t.lr.base_mask);
  get_to(j, "lr_milestones", t.lr.milestones);
  get_to(j, "lr_factor", t.lr.factor);
  get_to(j, "batch_initial", t.batch.initial);
  get_to(j, "batch_growth", t.batch.growth);
  get_to(j, "batch_max", t.batch.max);
  get_to(j, "zero_loss_threshold", t.batch.zero_loss_threshold);
  get_to(j, "split_ratio", t.split_ratio);
  get_to(j, "train_on", t.train_on);
  t.lr.total_epochs = t.epochs;
  t.batch.current = t.batch.initial;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j{{"world", world_to_json(cfg.world)},
         {"model", model_to_json(cfg.model)},
         {"train", train_to_json(cfg.train)},
         {"eval", json{{"distance_threshold", cfg.eval.distance_threshold},
                       {"top_percent", cfg.eval.top_percent}}}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_experiment_config_json(const std::string& text) {
  ExperimentConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    if (j.contains("world")) world_from_json(j.at("world"), cfg.world);
    if (j.contains("model")) model_from_json(j.at("model"), cfg.model);
    if (j.contains("train")) train_from_json(j.at("train"), cfg.train);
    if (j.contains("eval")) {
      get_to(j.at("eval"), "distance_threshold", cfg.eval.distance_threshold);
      get_to(j.at("eval"), "top_percent", cfg.eval.top_percent);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config_json(ss.str());
}

void save_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write config: " + path);
  os << experiment_config_json(cfg);
}

DescriptorDatabase build_descriptor_database(const PlaceModel& model, const Dataset& part) {
  if (part.size() == 0) throw DataError("cannot build a database from an empty dataset");
  Mat desc(part.size(), model.descriptor_dim());
  std::vector<std::string> ids;
  ids.reserve(part.samples.size());
  for (Index i = 0; i < part.size(); ++i) {
    const auto& s = part.samples[static_cast<std::size_t>(i)];
    desc.row(i) = model.describe(s).vector.transpose();
    ids.push_back(s.id);
  }
  return DescriptorDatabase::build(std::move(desc), part.positions(), std::move(ids),
                                   model.layout());
}

EvalResult evaluate_model(const PlaceModel& model, const Dataset& data, double split_ratio,
                          const EvalProtocol& protocol) {
  auto [db_part, query_part] = split_database_queries(data, split_ratio);
  DescriptorDatabase db = build_descriptor_database(model, db_part);
  Mat qdesc(query_part.size(), model.descriptor_dim());
  for (Index i = 0; i < query_part.size(); ++i)
    qdesc.row(i) = model.describe(query_part.samples[static_cast<std::size_t>(i)]).vector
                       .transpose();
  return evaluate(db, qdesc, query_part.positions(), protocol);
}

ExperimentOutcome run_experiment(const Dataset& data, ExperimentConfig cfg) {
  cfg.model.dataset_cameras = data.cameras;
  if (cfg.model.mask_classes <= 0)
    cfg.model.mask_classes = data.mask_classes > 0 ? data.mask_classes : 16;
  PlaceModel model(cfg.model);
  TrainResult trained = train(model, data, cfg.train);
  ExperimentOutcome out;
  out.metrics = evaluate_model(model, data, cfg.train.split_ratio, cfg.eval);
  out.log = std::move(trained.log);
  out.descriptor_dim = model.descriptor_dim();
  return out;
}

double random_retrieval_baseline(const Mat& db_positions, const Mat& query_positions,
                                 double threshold) {
  if (db_positions.rows() == 0 || query_positions.rows() == 0)
    throw DataError("baseline: empty positions");
  double acc = 0.0;
  for (Index q = 0; q < query_positions.rows(); ++q) {
    long within = 0;
    for (Index r = 0; r < db_positions.rows(); ++r)
      if ((db_positions.row(r) - query_positions.row(q)).norm() <= threshold) ++within;
    acc += static_cast<double>(within) / static_cast<double>(db_positions.rows());
  }
  return 100.0 * acc / static_cast<double>(query_positions.rows());
}

std::vector<AblationRow> run_ablation(const Dataset& data, const ExperimentConfig& base,
                                      const std::string& axis, int threads) {
  struct Cell {
    std::string label;
    std::string modalities, camera_set, fusion;
  };
  std::vector<Cell> cells;
  if (axis == "fusion-methods") {
    const std::pair<const char*, const char*> methods[] = {
        {"Add", "add"},     {"Concat", "concat"},   {"GeM-1D", "gem1d"},
        {"MLP512", "mlp512"}, {"MLP256", "mlp256"}, {"SA+Add", "sa_add"},
        {"SA+Concat", "sa_concat"}};
    for (const auto& [label, name] : methods) cells.push_back({label, "I", "F+B", name});
  } else if (axis == "camera-sets") {
    for (const char* set : {"F", "F+B", "L+R", "A"})
      cells.push_back({set, "I", set, base.model.fusion});
  } else if (axis == "modality-sets") {
    for (const char* mods : {"I", "L", "L+I", "L+I+S", "L+I+T", "L+I+S+T"})
      cells.push_back({mods, mods, base.model.camera_set, base.model.fusion});
  } else {
    throw ConfigError("unknown ablation axis: " + axis +
                      " (use fusion-methods, camera-sets or modality-sets)");
  }

  std::vector<AblationRow> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        ExperimentConfig cfg = base;
        cfg.model.modalities = cells[i].modalities;
        cfg.model.camera_set = cells[i].camera_set;
        cfg.model.fusion = cells[i].fusion;
        const std::uint64_t cell_seed = Rng::derive(base.train.seed, 9000 + i);
        cfg.model.init_seed = cell_seed;
        cfg.train.seed = cell_seed;
        ExperimentOutcome out = run_experiment(data, cfg);
        rows[i] = {cells[i].label, out.descriptor_dim, out.metrics.ar_at_1,
                   out.metrics.ar_at_1pct};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!errors[i].empty())
      throw Error("ablation cell '" + cells[i].label + "' failed: " + errors[i]);
  return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write ablation table: " + path);
  os << "label,descriptor_dim,ar_at_1,ar_at_1pct\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.2f,%.2f\n", r.label.c_str(), r.descriptor_dim,
                  r.ar_at_1, r.ar_at_1pct);
    os << buf;
  }
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t best1 = 0, best1pct = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ar_at_1 > rows[best1].ar_at_1) best1 = i;
    if (rows[i].ar_at_1pct > rows[best1pct].ar_at_1pct) best1pct = i;
  }
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %10s %8s %8s\n", "config", "dim", "AR@1", "AR@1%");
  out += buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-12s %10d %7.2f%s %7.2f%s\n", rows[i].label.c_str(),
                  rows[i].descriptor_dim, rows[i].ar_at_1, i == best1 ? "*" : " ",
                  rows[i].ar_at_1pct, i == best1pct ? "*" : " ");
    out += buf;
  }
  out += "(* best in column)\n";
  return out;
}

void write_metrics_csv(const std::string& path, const EvalResult& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write metrics: " + path);
  char buf[96];
  os << "ar_at_1,ar_at_1pct,n_for_1pct\n";
  std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%d\n", m.ar_at_1, m.ar_at_1pct, m.n_for_1pct);
  os << buf;
}

void write_recall_curve_csv(const std::string& path, const EvalResult& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write recall curve: " + path);
  os << "n,recall\n";
  char buf[64];
  for (std::size_t i = 0; i < m.recall_at_n.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.2f\n", i + 1, m.recall_at_n[i]);
    os << buf;
  }
}

std::string metrics_table(const EvalResult& m) {
  char buf[160];
  std::string out = "           AR@1    AR@1%\n";
  std::snprintf(buf, sizeof(buf), "metrics  %6.2f   %6.2f   (1%% of database = top %d)\n",
                m.ar_at_1, m.ar_at_1pct, m.n_for_1pct);
  out += buf;
  return out;
}

}  // namespace mss
