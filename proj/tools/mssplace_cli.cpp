#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mssplace/cli/experiment.hpp"
#include "mssplace/cli/svg_plot.hpp"

namespace fs = std::filesystem;
using namespace mss;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 2;
};

ExperimentConfig load_config_or_default(const GlobalArgs& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = load_experiment_config(g.config_path);
  if (g.seed_set) {
    cfg.world.seed = g.seed;
    cfg.train.seed = g.seed;
    cfg.model.init_seed = g.seed;
  }
  return cfg;
}

Dataset load_dataset_arg(const std::string& data) {
  fs::path p(data);
  if (fs::is_directory(p)) p /= "manifest.csv";
  return load_real_dataset(p.string());
}

void resolve_model_for_dataset(ExperimentConfig& cfg, const Dataset& data) {
  cfg.model.dataset_cameras = data.cameras;
  if (cfg.model.mask_classes <= 0)
    cfg.model.mask_classes = data.mask_classes > 0 ? data.mask_classes : 16;
}

int cmd_synth(const GlobalArgs& g) {
  ExperimentConfig cfg = load_config_or_default(g);
  if (g.out_dir.empty()) throw ConfigError("synth: --out directory required");
  Dataset dataset = generate_world(cfg.world);
  save_dataset(dataset, g.out_dir);
  save_experiment_config((fs::path(g.out_dir) / "config.json").string(), cfg);
  std::cout << "wrote " << dataset.size() << " samples (" << cfg.world.traversals
            << " traversals, " << cfg.world.cameras << " cameras) to " << g.out_dir << "\n";
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& data) {
  ExperimentConfig cfg = load_config_or_default(g);
  if (g.out_dir.empty()) throw ConfigError("train: --out directory required");
  Dataset dataset = load_dataset_arg(data);
  resolve_model_for_dataset(cfg, dataset);

  PlaceModel model(cfg.model);
  TrainResult result = train(model, dataset, cfg.train);

  fs::create_directories(g.out_dir);
  model.save_artifacts(g.out_dir);
  write_epoch_log_csv((fs::path(g.out_dir) / "epoch_log.csv").string(), result.log);
  save_experiment_config((fs::path(g.out_dir) / "config.json").string(), cfg);
  std::cout << "trained " << cfg.model.modalities << " (" << model.descriptor_dim()
            << "-dim descriptor) for " << cfg.train.epochs << " epochs; final loss "
            << (result.log.empty() ? 0.0 : result.log.back().loss) << "\n";
  return 0;
}

std::unique_ptr<PlaceModel> load_checkpoint(const std::string& dir, ExperimentConfig& cfg) {
  cfg = load_experiment_config((fs::path(dir) / "config.json").string());
  auto model = std::make_unique<PlaceModel>(cfg.model);
  model->load_artifacts(dir);
  return model;
}

int cmd_build_db(const GlobalArgs& g, const std::string& checkpoint, const std::string& data,
                 const std::string& side) {
  ExperimentConfig cfg;
  auto model_ptr = load_checkpoint(checkpoint, cfg);
  PlaceModel& model = *model_ptr;
  Dataset dataset = load_dataset_arg(data);
  Dataset part = dataset;
  if (side != "all") {
    auto [db_part, query_part] = split_database_queries(dataset, cfg.train.split_ratio);
    part = side == "database" ? std::move(db_part) : std::move(query_part);
  }
  DescriptorDatabase db = build_descriptor_database(model, part);
  if (g.out_dir.empty()) throw ConfigError("build-db: --out file required");
  db.save(g.out_dir);
  std::cout << "built database: " << db.size() << " rows, dim " << db.dim() << " -> " << g.out_dir
            << "\n";
  return 0;
}

int cmd_query(const GlobalArgs& g, const std::string& db_path, const std::string& checkpoint,
              const std::string& data, int k) {
  ExperimentConfig cfg;
  auto model_ptr = load_checkpoint(checkpoint, cfg);
  PlaceModel& model = *model_ptr;
  DescriptorDatabase db = DescriptorDatabase::load(db_path);
  Dataset dataset = load_dataset_arg(data);
  auto [db_part, query_part] = split_database_queries(dataset, cfg.train.split_ratio);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!g.out_dir.empty()) {
    file.open(g.out_dir, std::ios::trunc);
    if (!file) throw DataError("cannot write query results: " + g.out_dir);
    os = &file;
  }
  (*os) << "query_id,rank,match_id,distance\n";
  char buf[256];
  for (const auto& s : query_part.samples) {
    const GlobalDescriptor d = model.describe(s);
    const auto hits = query_knn(db, d.vector, k);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%s,%.6f\n", s.id.c_str(), r + 1,
                    hits[r].id.c_str(), hits[r].distance);
      (*os) << buf;
    }
  }
  return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& checkpoint, const std::string& data) {
  ExperimentConfig cfg;
  auto model_ptr = load_checkpoint(checkpoint, cfg);
  PlaceModel& model = *model_ptr;
  Dataset dataset = load_dataset_arg(data);
  EvalResult metrics = evaluate_model(model, dataset, cfg.train.split_ratio, cfg.eval);
  std::cout << metrics_table(metrics);
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    write_metrics_csv((fs::path(g.out_dir) / "metrics.csv").string(), metrics);
    write_recall_curve_csv((fs::path(g.out_dir) / "recall_curve.csv").string(), metrics);
    std::ofstream table((fs::path(g.out_dir) / "metrics.txt").string(), std::ios::trunc);
    table << metrics_table(metrics);
    write_recall_svg((fs::path(g.out_dir) / "recall.svg").string(),
                     {{cfg.model.modalities, metrics.recall_at_n}});
    save_experiment_config((fs::path(g.out_dir) / "config.json").string(), cfg);
  }
  return 0;
}

int cmd_ablate(const GlobalArgs& g, const std::string& data, const std::string& axis) {
  ExperimentConfig cfg = load_config_or_default(g);
  Dataset dataset = data.empty() ? generate_world(cfg.world) : load_dataset_arg(data);
  const auto rows = run_ablation(dataset, cfg, axis, g.threads);
  std::cout << ablation_table(rows);
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    write_ablation_csv((fs::path(g.out_dir) / "ablation.csv").string(), rows);
    std::ofstream table((fs::path(g.out_dir) / "ablation.txt").string(), std::ios::trunc);
    table << ablation_table(rows);
    save_experiment_config((fs::path(g.out_dir) / "config.json").string(), cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mssplace: multimodal place recognition experiments"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  app.add_option("--out", g.out_dir, "output directory or file");
  app.add_option("--seed", g.seed, "override every seed in the config")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "worker threads for ablation cells");

  auto* synth = app.add_subcommand("synth", "generate a synthetic multimodal dataset");

  std::string data, checkpoint, db_path, side = "database", axis = "modality-sets";
  int k = 5;
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--data", data, "dataset directory or manifest")->required();

  auto* build_db = app.add_subcommand("build-db", "encode a dataset split into a database file");
  build_db->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  build_db->add_option("--data", data, "dataset directory or manifest")->required();
  build_db->add_option("--split", side, "database | query | all");

  auto* query = app.add_subcommand("query", "K-nearest-neighbor lookups for the query split");
  query->add_option("--db", db_path, "database file (PDB1)")->required();
  query->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  query->add_option("--data", data, "dataset directory or manifest")->required();
  query->add_option("-k,--k", k, "neighbors per query");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (AR@1, AR@1%, recall@N)");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--data", data, "dataset directory or manifest")->required();

  auto* ablate = app.add_subcommand("ablate", "run an ablation axis and merge the results");
  ablate->add_option("--data", data, "dataset directory or manifest (default: synthesize)");
  ablate->add_option("--axis", axis, "fusion-methods | camera-sets | modality-sets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(g);
    if (train_cmd->parsed()) return cmd_train(g, data);
    if (build_db->parsed()) return cmd_build_db(g, checkpoint, data, side);
    if (query->parsed()) return cmd_query(g, db_path, checkpoint, data, k);
    if (eval_cmd->parsed()) return cmd_eval(g, checkpoint, data);
    if (ablate->parsed()) return cmd_ablate(g, data, axis);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
