#include "vsmile/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vsmile {

namespace {

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#8e5fa8", "#c77f2e", "#4f6d7a"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  double n = 10.0;
  if (r <= 1.5)
    n = 1.0;
  else if (r <= 3.0)
    n = 2.0;
  else if (r <= 7.0)
    n = 5.0;
  return n * mag;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  std::vector<double> ticks;

  void fit(double vmin, double vmax) {
    if (log) {
      if (vmin <= 0.0) throw std::domain_error("log axis needs positive data");
      lo = std::log10(vmin);
      hi = std::log10(vmax);
      if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
      }
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
      for (double d = std::ceil(lo); d <= std::floor(hi) + 1e-9; d += 1.0) ticks.push_back(d);
      if (ticks.size() < 2) {
        // less than one decade of span: fall back to evenly spaced ticks
        ticks.clear();
        for (int i = 0; i <= 4; ++i) ticks.push_back(lo + (hi - lo) * i / 4.0);
      }
    } else {
      lo = vmin;
      hi = vmax;
      if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
      }
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
      const double step = nice_step(hi - lo);
      for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(t);
    }
  }

  double coord(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (coord(v) - lo) / (hi - lo); }
  std::string tick_label(double t) const {
    return log ? fmt(std::pow(10.0, t)) : fmt(std::abs(t) < 1e-12 ? 0.0 : t);
  }
};

struct Frame {
  int width, height;
  int ml = 62, mr = 16, mt = 30, mb = 46;
  Axis xa, ya;

  double px(double v) const { return ml + xa.frac(v) * (width - ml - mr); }
  double py(double v) const { return height - mb - ya.frac(v) * (height - mt - mb); }

  void open(std::ostringstream& os, const SvgOptions& o) const {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    if (!o.title.empty())
      os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
         << o.title << "</text>\n";
    // grid + ticks
    for (double t : xa.ticks) {
      const double x = px(xa.log ? std::pow(10.0, t) : t);
      os << "<line x1=\"" << fmt(x) << "\" y1=\"" << mt << "\" x2=\"" << fmt(x) << "\" y2=\""
         << height - mb << "\" stroke=\"#e0e0e0\"/>\n";
      os << "<text x=\"" << fmt(x) << "\" y=\"" << height - mb + 16
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << xa.tick_label(t)
         << "</text>\n";
    }
    for (double t : ya.ticks) {
      const double y = py(ya.log ? std::pow(10.0, t) : t);
      os << "<line x1=\"" << ml << "\" y1=\"" << fmt(y) << "\" x2=\"" << width - mr << "\" y2=\""
         << fmt(y) << "\" stroke=\"#e0e0e0\"/>\n";
      os << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(y + 3.5)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << ya.tick_label(t)
         << "</text>\n";
    }
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << width - ml - mr
       << "\" height=\"" << height - mt - mb << "\" fill=\"none\" stroke=\"#404040\"/>\n";
    if (!o.x_label.empty())
      os << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 8
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << o.x_label
         << "</text>\n";
    if (!o.y_label.empty())
      os << "<text x=\"14\" y=\"" << (mt + height - mb) / 2
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 "
         << (mt + height - mb) / 2 << ")\">" << o.y_label << "</text>\n";
  }
};

}  // namespace

std::string render_svg_lines(const std::vector<SvgSeries>& series, const SvgOptions& options) {
  if (series.empty()) throw std::invalid_argument("no series to plot");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y length mismatch");
    if (s.x.empty()) throw std::invalid_argument("empty series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  Frame fr;
  fr.width = options.width;
  fr.height = options.height;
  fr.xa.log = options.log_x;
  fr.ya.log = options.log_y;
  fr.xa.fit(xmin, xmax);
  fr.ya.fit(ymin, ymax);

  std::ostringstream os;
  fr.open(os, options);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << fmt(fr.px(s.x[i])) << ',' << fmt(fr.py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << fmt(fr.px(s.x[i])) << "\" cy=\"" << fmt(fr.py(s.y[i]))
         << "\" r=\"2.2\" fill=\"" << color << "\"/>\n";
    if (!s.label.empty())
      os << "<text x=\"" << fr.ml + 8 << "\" y=\"" << fr.mt + 14 + 14 * static_cast<int>(si)
         << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << color << "\">" << s.label
         << "</text>\n";
  }
  os << "<!-- data\nseries,x,y\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << s.label << ',' << fmt(s.x[i]) << ',' << fmt(s.y[i]) << '\n';
  os << "-->\n</svg>\n";
  return os.str();
}

std::string render_svg_boxes(const std::vector<BoxSummary>& summary, const SvgOptions& options) {
  if (summary.empty()) throw std::invalid_argument("no boxes to plot");
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  double xmin = ymin, xmax = -ymin;
  for (const auto& b : summary) {
    ymin = std::min(ymin, b.whisker_lo);
    ymax = std::max(ymax, b.whisker_hi);
    xmin = std::min(xmin, static_cast<double>(b.horizon_day));
    xmax = std::max(xmax, static_cast<double>(b.horizon_day));
  }
  Frame fr;
  fr.width = options.width;
  fr.height = options.height;
  fr.ya.log = options.log_y;
  fr.xa.fit(xmin - 0.5, xmax + 0.5);
  fr.ya.fit(ymin, ymax);

  std::ostringstream os;
  fr.open(os, options);
  const double bw = 0.6 * (fr.width - fr.ml - fr.mr) / (xmax - xmin + 1.0) / 2.0;
  for (const auto& b : summary) {
    const double x = fr.px(b.horizon_day);
    const double yq1 = fr.py(b.p25), yq3 = fr.py(b.p75);
    const double ymed = fr.py(b.p50), ylo = fr.py(b.whisker_lo), yhi = fr.py(b.whisker_hi);
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(ylo) << "\" x2=\"" << fmt(x) << "\" y2=\""
       << fmt(yhi) << "\" stroke=\"#404040\"/>\n";
    for (double yw : {ylo, yhi})
      os << "<line x1=\"" << fmt(x - bw / 2) << "\" y1=\"" << fmt(yw) << "\" x2=\""
         << fmt(x + bw / 2) << "\" y2=\"" << fmt(yw) << "\" stroke=\"#404040\"/>\n";
    os << "<rect x=\"" << fmt(x - bw) << "\" y=\"" << fmt(yq3) << "\" width=\"" << fmt(2 * bw)
       << "\" height=\"" << fmt(yq1 - yq3) << "\" fill=\"#9ec9e8\" stroke=\"#1f6fb2\"/>\n";
    os << "<line x1=\"" << fmt(x - bw) << "\" y1=\"" << fmt(ymed) << "\" x2=\"" << fmt(x + bw)
       << "\" y2=\"" << fmt(ymed) << "\" stroke=\"#d1495b\" stroke-width=\"1.5\"/>\n";
  }
  os << "<!-- data\nhorizon_day,n,p25,p50,p75,whisker_lo,whisker_hi\n";
  for (const auto& b : summary)
    os << b.horizon_day << ',' << b.n << ',' << fmt(b.p25) << ',' << fmt(b.p50) << ','
       << fmt(b.p75) << ',' << fmt(b.whisker_lo) << ',' << fmt(b.whisker_hi) << '\n';
  os << "-->\n</svg>\n";
  return os.str();
}

}  // namespace vsmile
