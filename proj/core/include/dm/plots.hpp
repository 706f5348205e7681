#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dm::plots {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Minimal deterministic SVG line chart (fixed canvas, %.6g formatting).
void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<Series>& series);

struct BarGroup {
  std::string name;                // legend entry (one run/model)
  std::vector<double> values;      // one per category
};

void write_bar_chart(const std::filesystem::path& path,
                     const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<BarGroup>& groups);

}  // namespace dm::plots
