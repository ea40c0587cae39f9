#pragma once

#include <vector>

#include "mssplace/core/errors.hpp"

namespace mss {

// Learning-rate groups. Every parameter carries one of these tags.
enum class Branch { kImage = 0, kCloud = 1, kText = 2, kMask = 3 };

// Grows the batch while the epoch still produces enough nonzero-loss
// triplets: ratio below the threshold -> multiply by growth (round half up),
// capped at max.
struct BatchSizer {
  int initial = 16;
  double growth = 1.4;
  int max = 128;
  double zero_loss_threshold = 0.7;
  int current = 16;
};

BatchSizer update_batch_size(BatchSizer sizer, double zero_loss_ratio);

// Per-branch base rates with step decay at the milestone epochs. Epochs are
// 1-based; the decay applies to epochs strictly after a milestone.
struct LrSchedule {
  double base_image = 1e-4;
  double base_cloud = 1e-3;
  double base_text = 1e-4;
  double base_mask = 1e-3;
  std::vector<int> milestones = {40, 60};
  double factor = 0.1;
  int total_epochs = 80;

  double base(Branch branch) const;
  double rate(Branch branch, int epoch) const;
};

}  // namespace mss
