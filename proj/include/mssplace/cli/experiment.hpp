#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mssplace/model/place_model.hpp"
#include "mssplace/retrieval/database.hpp"
#include "mssplace/synth/world.hpp"
#include "mssplace/training/trainer.hpp"

namespace mss {

// One config file drives everything: world generation, model shape, the
// training recipe and the evaluation protocol.
struct ExperimentConfig {
  WorldConfig world;
  ModelConfig model;
  TrainConfig train;
  EvalProtocol eval;
};

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& cfg);
std::string experiment_config_json(const ExperimentConfig& cfg);
ExperimentConfig parse_experiment_config_json(const std::string& text);

// Encodes every sample of `part` with a trained model.
DescriptorDatabase build_descriptor_database(const PlaceModel& model, const Dataset& part);

// Splits, encodes and scores a trained model on a dataset.
EvalResult evaluate_model(const PlaceModel& model, const Dataset& data, double split_ratio,
                          const EvalProtocol& protocol);

struct ExperimentOutcome {
  EvalResult metrics;
  std::vector<EpochLog> log;
  int descriptor_dim = 0;
};

// Fresh model + train + evaluate, all from the config. The model's camera
// count and mask classes are taken from the dataset when unset.
ExperimentOutcome run_experiment(const Dataset& data, ExperimentConfig cfg);

// Expected AR@1 (percent) of a uniformly random ranking: the mean fraction
// of database rows within the threshold of each query.
double random_retrieval_baseline(const Mat& db_positions, const Mat& query_positions,
                                 double threshold);

struct AblationRow {
  std::string label;
  int descriptor_dim = 0;
  double ar_at_1 = 0.0;
  double ar_at_1pct = 0.0;
};

// axis: fusion-methods | camera-sets | modality-sets. Cells run on up to
// `threads` workers; each cell is seeded by (base seed, cell index) and is
// internally single-threaded.
std::vector<AblationRow> run_ablation(const Dataset& data, const ExperimentConfig& base,
                                      const std::string& axis, int threads);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

void write_metrics_csv(const std::string& path, const EvalResult& metrics);
void write_recall_curve_csv(const std::string& path, const EvalResult& metrics);
std::string metrics_table(const EvalResult& metrics);

}  // namespace mss
