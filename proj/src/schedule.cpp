#include "mssplace/training/schedule.hpp"

#include <cmath>

namespace mss {

BatchSizer update_batch_size(BatchSizer sizer, double zero_loss_ratio) {
  if (zero_loss_ratio < 0.0 || zero_loss_ratio > 1.0)
    throw ConfigError("batch sizer: zero-loss ratio must lie in [0,1]");
  if (zero_loss_ratio < sizer.zero_loss_threshold) {
    const int grown = static_cast<int>(std::floor(sizer.current * sizer.growth + 0.5));
    sizer.current = std::min(sizer.max, grown);
  }
  return sizer;
}

double LrSchedule::base(Branch branch) const {
  switch (branch) {
    case Branch::kImage: return base_image;
    case Branch::kCloud: return base_cloud;
    case Branch::kText: return base_text;
    case Branch::kMask: return base_mask;
  }
  throw ConfigError("unknown branch");
}

double LrSchedule::rate(Branch branch, int epoch) const {
  if (epoch < 1) throw ConfigError("lr schedule: epochs are 1-based");
  int decays = 0;
  for (int m : milestones)
    if (epoch > m) ++decays;
  return base(branch) * std::pow(factor, decays);
}

}  // namespace mss
