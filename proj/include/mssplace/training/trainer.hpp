#pragma once

#include <string>
#include <vector>

#include "mssplace/model/place_model.hpp"
#include "mssplace/training/loss.hpp"
#include "mssplace/training/schedule.hpp"

namespace mss {

struct TrainConfig {
  int epochs = 80;
  std::uint64_t seed = 1;
  double margin = 0.2;
  double r_pos = 10.0;  // meters: positives
  double r_neg = 50.0;  // meters: negatives beyond
  LrSchedule lr;
  BatchSizer batch;
  double split_ratio = 0.7;
  std::string train_on = "database";  // "database" (default) | "all"
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;             // mean over mined triplets
  double zero_loss_ratio = 0.0;  // zero-loss triplets / mined triplets
  int batch_size = 0;            // size in effect during this epoch
  double lr_image = 0.0, lr_cloud = 0.0, lr_text = 0.0, lr_mask = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  long total_triplets = 0;
};

// Metric-learning loop: uniform batches with a positive-pair retry,
// batch-hard mining, triplet margin loss, Adam with per-branch rates and
// step decay, dynamic batch growth. Deterministic given (model init, data,
// seed).
TrainResult train(PlaceModel& model, const Dataset& dataset, const TrainConfig& cfg);

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& log);
std::vector<EpochLog> read_epoch_log_csv(const std::string& path);

}  // namespace mss
