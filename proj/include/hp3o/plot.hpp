#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hp3o::plot {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One curve: mean line plus an optional +-band.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // empty when there is no spread to draw
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw CsvError(where + ": not a number: '" + s + "'");
  }
}

// Reads either an aggregated curve (env_steps, mean, std) or a single-run log (env_steps, return).
inline Series read_curve_csv(std::istream& in, const std::string& label, const std::string& name = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(name + ": empty file");
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& key) -> long {
    const auto it = std::find(header.begin(), header.end(), key);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const long xc = col("env_steps");
  long yc = col("mean");
  const long sc = col("std");
  const bool aggregated = yc >= 0;
  if (!aggregated) yc = col("return");
  if (xc < 0 || yc < 0) throw CsvError(name + ": header needs env_steps and mean or return columns");

  Series s;
  s.label = label;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw CsvError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                     " cells, got " + std::to_string(cells.size()));
    const std::string where = name + ":" + std::to_string(lineno);
    s.x.push_back(parse_cell(cells[xc], where));
    s.y.push_back(parse_cell(cells[yc], where));
    if (aggregated && sc >= 0) s.band.push_back(parse_cell(cells[sc], where));
  }
  if (s.x.empty()) throw CsvError(name + ": no data rows");
  return s;
}

inline Series read_curve_csv_file(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  return read_curve_csv(in, label, path);
}

inline const std::array<const char*, 6>& palette() {
  static const std::array<const char*, 6> colors{"#1f77b4", "#d62728", "#2ca02c",
                                                 "#ff7f0e", "#9467bd", "#000000"};
  return colors;
}

struct PlotOptions {
  int width = 720;
  int height = 440;
  std::string title = "Training return";
  std::string x_label = "environment steps";
  std::string y_label = "episode return";
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a >= 1e6) std::snprintf(buf, sizeof(buf), "%.1fM", v / 1e6);
  else if (a >= 1e3) std::snprintf(buf, sizeof(buf), "%.0fk", v / 1e3);
  else if (a >= 10 || v == 0) std::snprintf(buf, sizeof(buf), "%.0f", v);
  else std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// Standalone SVG: mean polylines, translucent +-std polygons, ticks and a legend.
inline std::string render_svg(const std::vector<Series>& series, const PlotOptions& opt = {}) {
  using detail::fmt;
  if (series.empty()) throw std::invalid_argument("render_svg: nothing to plot");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double b = s.band.empty() ? 0.0 : s.band[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - b);
      y1 = std::max(y1, s.y[i] + b);
    }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;

  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(opt.width / 2.0) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">"
    << detail::escape(opt.title) << "</text>\n";
  o << "<g stroke=\"#444\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
    << fmt(top + ph) << "\"/>\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
    << fmt(top + ph) << "\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x0 + (x1 - x0) * i / kTicks, yv = y0 + (y1 - y0) * i / kTicks;
    o << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px(xv)) << "\" y2=\""
      << fmt(top + ph + 5) << "\"/>\n";
    o << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << fmt(left) << "\" y2=\""
      << fmt(py(yv)) << "\"/>\n";
  }
  o << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x0 + (x1 - x0) * i / kTicks, yv = y0 + (y1 - y0) * i / kTicks;
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << detail::tick_label(xv) << "</text>\n";
    o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(yv) << "</text>\n";
  }
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(opt.height - 12.0) << "\" text-anchor=\"middle\">"
    << detail::escape(opt.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << fmt(top + ph / 2) << ")\">" << detail::escape(opt.y_label) << "</text>\n</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette()[k % palette().size()];
    if (!s.band.empty()) {
      o << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] + s.band[i])) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) o << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] - s.band[i])) << ' ';
      o << "\"/>\n";
    }
    o << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
    o << "\"/>\n";
  }

  o << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = top + 12 + 18.0 * static_cast<double>(k);
    const char* color = palette()[k % palette().size()];
    o << "<line x1=\"" << fmt(left + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(left + 36) << "\" y2=\""
      << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2.5\"/>\n";
    o << "<text x=\"" << fmt(left + 42) << "\" y=\"" << fmt(ly + 4) << "\">" << detail::escape(series[k].label)
      << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace hp3o::plot
