// Copyright 2026 The v2xcoop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "v2xcoop_cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace v2xcoop::cli::svg
{

namespace
{

constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string escape(const std::string & text)
{
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Range
{
  double lo{std::numeric_limits<double>::infinity()};
  double hi{-std::numeric_limits<double>::infinity()};

  void add(double v)
  {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish()
  {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.05, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> ticks(const Range & r)
{
  const double span = r.hi - r.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) {
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return out;
}

void header(std::ostringstream & out, const ChartOptions & o)
{
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\""
      << o.height << "\" viewBox=\"0 0 " << o.width << ' ' << o.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << o.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(o.title) << "</text>\n";
}

}  // namespace

const std::string & palette(std::size_t index)
{
  static const std::array<std::string, 10> colors{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[index % colors.size()];
}

std::string line_chart(const std::vector<Series> & series, const ChartOptions & o)
{
  auto ty = [&](double v) {
    if (!o.log_y) {
      return v;
    }
    return v > 0.0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN();
  };
  Range rx;
  Range ry;
  for (const auto & s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(ty(s.y[i]))) {
        rx.add(s.x[i]);
        ry.add(ty(s.y[i]));
      }
    }
  }
  rx.finish();
  ry.finish();
  const double pw = o.width - kLeft - kRight;
  const double ph = o.height - kTop - kBottom;
  if (o.equal_aspect) {
    const double scale = std::max((rx.hi - rx.lo) / pw, (ry.hi - ry.lo) / ph);
    const double cx = 0.5 * (rx.lo + rx.hi);
    const double cy = 0.5 * (ry.lo + ry.hi);
    rx = {cx - 0.5 * scale * pw, cx + 0.5 * scale * pw};
    ry = {cy - 0.5 * scale * ph, cy + 0.5 * scale * ph};
  }
  auto px = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ostringstream out;
  header(out, o);
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (double t : ticks(rx)) {
    out << "<line x1=\"" << px(t) << "\" y1=\"" << kTop << "\" x2=\"" << px(t) << "\" y2=\""
        << kTop + ph << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << px(t) << "\" y=\"" << kTop + ph + 16
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  std::vector<double> yt;
  if (o.log_y) {
    for (double e = std::ceil(ry.lo); e <= ry.hi; e += std::max(1.0, std::ceil((ry.hi - ry.lo) / 8.0))) {
      yt.push_back(e);
    }
  } else {
    yt = ticks(ry);
  }
  for (double t : yt) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft + pw << "\" y2=\""
        << py(t) << "\" stroke=\"#ddd\"/>\n";
    const std::string label = o.log_y ? "1e" + fmt(t) : fmt(t);
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
        << label << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << o.height - 10
      << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Series & ser = series[s];
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      const double v = ty(ser.y[i]);
      if (!std::isfinite(v) || !std::isfinite(ser.x[i])) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + fmt(px(ser.x[i])) + ' ' + fmt(py(v));
      pen = true;
    }
    out << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << palette(s)
        << "\" stroke-width=\"1.5\"" << (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(s) + 8.0;
    if (ly < kTop + ph) {
      out << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 30
          << "\" y2=\"" << ly << "\" stroke=\"" << palette(s) << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << kLeft + pw + 34 << "\" y=\"" << ly + 4 << "\">" << escape(ser.label)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string heat_map(
  const std::vector<std::vector<double>> & rows, const std::vector<std::string> & labels,
  double column_step, const ChartOptions & o)
{
  std::size_t cols = 0;
  double vmax = 0.0;
  for (const auto & r : rows) {
    cols = std::max(cols, r.size());
    for (double v : r) {
      if (std::isfinite(v)) {
        vmax = std::max(vmax, v);
      }
    }
  }
  const double pw = o.width - kLeft - kRight;
  const double ph = o.height - kTop - kBottom;
  const double cw = cols == 0 ? pw : pw / static_cast<double>(cols);
  const double rh = rows.empty() ? ph : ph / static_cast<double>(rows.size());
  std::ostringstream out;
  header(out, o);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const double v = rows[r][c];
      if (!std::isfinite(v)) {
        continue;
      }
      const double t = vmax > 0.0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - t)));
      out << "<rect x=\"" << fmt(kLeft + cw * static_cast<double>(c)) << "\" y=\""
          << fmt(kTop + rh * static_cast<double>(r)) << "\" width=\"" << fmt(cw + 0.05)
          << "\" height=\"" << fmt(rh) << "\" fill=\"rgb(" << std::max(g, 120) << ',' << g << ','
          << g << ")\"/>\n";
    }
    if (r < labels.size()) {
      out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + rh * (static_cast<double>(r) + 0.5) + 4
          << "\" text-anchor=\"end\">" << escape(labels[r]) << "</text>\n";
    }
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  Range rx{0.0, static_cast<double>(cols) * column_step};
  rx.finish();
  for (double t : ticks(rx)) {
    const double x = kLeft + t / (rx.hi - rx.lo) * pw;
    out << "<text x=\"" << x << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
        << fmt(t) << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << o.height - 10
      << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  out << "<text x=\"" << kLeft + pw + 10 << "\" y=\"" << kTop + 12 << "\">max " << fmt(vmax) << ' '
      << escape(o.y_label) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace v2xcoop::cli::svg
