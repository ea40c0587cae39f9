#include "mssplace/cli/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mssplace/core/errors.hpp"

namespace mss {

void write_recall_svg(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<double>>>& curves) {
  const int width = 520, height = 340;
  const double left = 56, right = 20, top = 24, bottom = 40;
  const double pw = width - left - right, ph = height - top - bottom;
  std::size_t max_n = 1;
  for (const auto& [label, c] : curves) max_n = std::max(max_n, c.size());

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf"};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write plot: " + path);
  char buf[512];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int g = 0; g <= 5; ++g) {
    const double y = top + ph * (1.0 - g / 5.0);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#dddddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\" "
                  "fill=\"#444444\">%d</text>\n",
                  left, y, left + pw, y, left - 6.0, y + 4.0, g * 20);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"#222222\">recall@N "
                "(%%)</text>\n<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                "fill=\"#222222\">N</text>\n",
                left, top - 8.0, left + pw / 2.0, height - 10.0);
  os << buf;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& curve = curves[ci].second;
    if (curve.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << palette[ci % 7]
       << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double x = left + pw * (max_n > 1 ? static_cast<double>(i) / (max_n - 1) : 0.5);
      const double y = top + ph * (1.0 - std::clamp(curve[i], 0.0, 100.0) / 100.0);
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
      os << buf;
    }
    os << "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">%s</text>\n",
                  left + 8.0, top + 16.0 + 14.0 * ci, palette[ci % 7], curves[ci].first.c_str());
    os << buf;
  }
  os << "</svg>\n";
  if (!os) throw DataError("plot write failed: " + path);
}

}  // namespace mss
