#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "censored_hybrid/common.hpp"

namespace censored_hybrid {

// Self-contained SVG line chart. No external assets, no scripts; safe to
// open in any browser or embed in a report.
struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool log_x = false;  // set on the chart, not per series
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
};

namespace detail {

inline std::string fmt_tick(double v) {
  std::ostringstream ss;
  if (v != 0.0 && (std::fabs(v) >= 1e5 || std::fabs(v) < 1e-3)) {
    ss.precision(1);
    ss << std::scientific << v;
  } else {
    ss.precision(6);
    ss << v;
    std::string s = ss.str();
    return s;
  }
  return ss.str();
}

inline std::vector<double> nice_ticks(double lo, double hi, int target) {
  std::vector<double> ticks;
  if (!(hi > lo)) return {lo};
  double span = hi - lo;
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
  double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + step * 1e-9; v += step) ticks.push_back(v);
  return ticks;
}

}  // namespace detail

inline std::string render_chart(const LineChart& chart, int width = 760,
                                int height = 460) {
  const double ml = 72, mr = 24, mt = 44, mb = 56;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const Series& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      double xv = chart.log_x ? std::log10(std::max(s.x[i], 1e-300)) : s.x[i];
      if (!std::isfinite(xv) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        xmin = xmax = xv;
        ymin = ymax = s.y[i];
        any = true;
      } else {
        xmin = std::min(xmin, xv);
        xmax = std::max(xmax, xv);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
  }
  if (!any) throw DataError("chart has no finite points");
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + (ymin == 0 ? 1 : std::fabs(ymin) * 0.1);
  double ypad = (ymax - ymin) * 0.06;
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) {
    double xv = chart.log_x ? std::log10(std::max(x, 1e-300)) : x;
    return ml + (xv - xmin) / (xmax - xmin) * pw;
  };
  auto sy = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out.precision(8);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2.0 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
      << chart.title << "</text>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"#333\"/>\n";

  for (double t : detail::nice_ticks(ymin, ymax, 6)) {
    double y = sy(t);
    out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw
        << "\" y2=\"" << y << "\" stroke=\"#ddd\" stroke-dasharray=\"3,3\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::fmt_tick(t) << "</text>\n";
  }
  for (double t : detail::nice_ticks(xmin, xmax, 7)) {
    double x = ml + (t - xmin) / (xmax - xmin) * pw;
    double shown = chart.log_x ? std::pow(10.0, t) : t;
    out << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x
        << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::fmt_tick(shown) << "</text>\n";
  }

  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << chart.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << chart.y_label
      << "</text>\n";

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
  std::size_t ci = 0;
  for (const Series& s : chart.series) {
    std::string color = s.color.empty() ? kPalette[ci % 6] : s.color;
    ++ci;
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
    }
    out << "\"/>\n";
  }

  // legend
  double lx = ml + pw - 170, ly = mt + 10;
  ci = 0;
  for (const Series& s : chart.series) {
    std::string color = s.color.empty() ? kPalette[ci % 6] : s.color;
    out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22
        << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2.4\"/>\n";
    out << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
        << "</text>\n";
    ly += 18;
    ++ci;
  }

  out << "</svg>\n";
  return out.str();
}

}  // namespace censored_hybrid
