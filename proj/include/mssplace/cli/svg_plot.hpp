#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mss {

// Minimal self-rendered recall@N line plot; no plotting dependency.
void write_recall_svg(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<double>>>& curves);

}  // namespace mss
