#include "dm/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dm/error.hpp"

namespace dm::plots {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << body;
  }
  std::filesystem::rename(tmp, path);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finalize() {
    if (!std::isfinite(lo)) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-12) {
      hi = lo + 1;
    }
  }
};

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<Series>& series) {
  Range xr, yr;
  for (const Series& s : series) {
    for (double v : s.xs) xr.include(v);
    for (double v : s.ys) yr.include(v);
  }
  yr.include(0.0);
  xr.finalize();
  yr.finalize();

  auto px = [&](double x) {
    return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight);
  };
  auto py = [&](double y) {
    return kHeight - kBottom -
           (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g6(kWidth) +
         "\" height=\"" + g6(kHeight) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + g6(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title +
         "</text>\n";

  // axes
  svg += "<line x1=\"" + g6(kLeft) + "\" y1=\"" + g6(kHeight - kBottom) +
         "\" x2=\"" + g6(kWidth - kRight) + "\" y2=\"" +
         g6(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + g6(kLeft) + "\" y1=\"" + g6(kTop) + "\" x2=\"" +
         g6(kLeft) + "\" y2=\"" + g6(kHeight - kBottom) +
         "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg += "<text x=\"" + g6(px(fx)) + "\" y=\"" + g6(kHeight - kBottom + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + g6(fx) +
           "</text>\n";
    svg += "<text x=\"" + g6(kLeft - 8) + "\" y=\"" + g6(py(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + g6(fy) + "</text>\n";
  }
  svg += "<text x=\"" + g6((kLeft + kWidth - kRight) / 2) + "\" y=\"" +
         g6(kHeight - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         x_label + "</text>\n";
  svg += "<text x=\"16\" y=\"" + g6((kTop + kHeight - kBottom) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
         "16 " +
         g6((kTop + kHeight - kBottom) / 2) + ")\">" + y_label + "</text>\n";

  size_t color = 0;
  double legend_y = kTop + 4;
  for (const Series& s : series) {
    const char* c = kColors[color % 8];
    std::string points;
    for (size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
      points += g6(px(s.xs[i])) + "," + g6(py(s.ys[i])) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(c) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    svg += "<rect x=\"" + g6(kWidth - kRight - 150) + "\" y=\"" +
           g6(legend_y - 9) + "\" width=\"12\" height=\"4\" fill=\"" + c +
           "\"/>\n";
    svg += "<text x=\"" + g6(kWidth - kRight - 132) + "\" y=\"" +
           g6(legend_y - 3) + "\" font-size=\"11\">" + s.name + "</text>\n";
    legend_y += 16;
    ++color;
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

void write_bar_chart(const std::filesystem::path& path,
                     const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<BarGroup>& groups) {
  Range yr;
  yr.include(0.0);
  for (const BarGroup& g : groups)
    for (double v : g.values) yr.include(v);
  yr.finalize();

  auto py = [&](double y) {
    return kHeight - kBottom -
           (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g6(kWidth) +
         "\" height=\"" + g6(kHeight) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + g6(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title +
         "</text>\n";
  svg += "<line x1=\"" + g6(kLeft) + "\" y1=\"" + g6(kHeight - kBottom) +
         "\" x2=\"" + g6(kWidth - kRight) + "\" y2=\"" +
         g6(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg += "<text x=\"" + g6(kLeft - 8) + "\" y=\"" + g6(py(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + g6(fy) + "</text>\n";
  }

  size_t ncat = categories.size();
  size_t ngrp = std::max<size_t>(1, groups.size());
  double span = (kWidth - kLeft - kRight) / static_cast<double>(ncat);
  double bar = span * 0.7 / static_cast<double>(ngrp);
  for (size_t c = 0; c < ncat; ++c) {
    double x0 = kLeft + span * static_cast<double>(c) + span * 0.15;
    for (size_t g = 0; g < groups.size(); ++g) {
      if (c >= groups[g].values.size()) continue;
      double v = groups[g].values[c];
      double top = py(v);
      svg += "<rect x=\"" + g6(x0 + bar * static_cast<double>(g)) + "\" y=\"" +
             g6(top) + "\" width=\"" + g6(bar * 0.9) + "\" height=\"" +
             g6(kHeight - kBottom - top) + "\" fill=\"" +
             kColors[g % 8] + "\"/>\n";
    }
    svg += "<text x=\"" + g6(x0 + span * 0.35) + "\" y=\"" +
           g6(kHeight - kBottom + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + categories[c] +
           "</text>\n";
  }
  double legend_y = kTop + 4;
  for (size_t g = 0; g < groups.size(); ++g) {
    svg += "<rect x=\"" + g6(kWidth - kRight - 150) + "\" y=\"" +
           g6(legend_y - 9) + "\" width=\"12\" height=\"8\" fill=\"" +
           kColors[g % 8] + "\"/>\n";
    svg += "<text x=\"" + g6(kWidth - kRight - 132) + "\" y=\"" +
           g6(legend_y) + "\" font-size=\"11\">" + groups[g].name +
           "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

}  // namespace dm::plots
