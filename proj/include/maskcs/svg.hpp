#ifndef MASKCS_SVG_HPP
#define MASKCS_SVG_HPP

// Minimal SVG figures for the experiment tables: quantile bands of the
// condition number against K (log scale), and a success-rate heatmap.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "experiments.hpp"
#include "format.hpp"

namespace maskcs::svg {

namespace detail {

inline std::string num(double v) { return format_double(v, 6); }

struct Frame {
  double width = 640, height = 420, left = 70, right = 20, top = 20, bottom = 50;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

inline void open(std::ostringstream& out, const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\""
      << num(f.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void axis_labels(std::ostringstream& out, const Frame& f, const std::string& x,
                        const std::string& y) {
  out << "<text x=\"" << num(f.left + f.plot_w() / 2) << "\" y=\"" << num(f.height - 10)
      << "\" text-anchor=\"middle\">" << x << "</text>\n"
      << "<text x=\"15\" y=\"" << num(f.top + f.plot_h() / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << num(f.top + f.plot_h() / 2) << ")\">" << y << "</text>\n";
}

}  // namespace detail

struct Series {
  std::string label;
  std::string color;
  std::vector<ConditionRow> rows;
};

/// log10(cond) against K; the middle quantile is drawn as a line, the outer
/// two as a shaded band. Infinite values are left out of the drawing.
inline std::string condition_plot(const std::vector<Series>& series) {
  using detail::num;
  detail::Frame f;
  double kmin = INFINITY, kmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (const auto& r : s.rows)
      for (double q : r.q)
        if (std::isfinite(q) && q > 0) {
          kmin = std::min(kmin, double(r.K));
          kmax = std::max(kmax, double(r.K));
          ymin = std::min(ymin, std::log10(q));
          ymax = std::max(ymax, std::log10(q));
        }
  std::ostringstream out;
  detail::open(out, f);
  if (!std::isfinite(kmin)) {
    out << "</svg>\n";
    return out.str();
  }
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1);
  if (kmax == kmin) kmax = kmin + 1;
  auto px = [&](double k) { return f.left + (k - kmin) / (kmax - kmin) * f.plot_w(); };
  auto py = [&](double q) { return f.top + (ymax - std::log10(q)) / (ymax - ymin) * f.plot_h(); };

  out << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.plot_w())
      << "\" height=\"" << num(f.plot_h()) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = ymin; e <= ymax; e += 1.0)
    out << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(py(std::pow(10.0, e)) + 4)
        << "\" text-anchor=\"end\">1e" << num(e) << "</text>\n";
  out << "<text x=\"" << num(f.left) << "\" y=\"" << num(f.top + f.plot_h() + 16)
      << "\" text-anchor=\"middle\">" << num(kmin) << "</text>\n"
      << "<text x=\"" << num(f.left + f.plot_w()) << "\" y=\"" << num(f.top + f.plot_h() + 16)
      << "\" text-anchor=\"middle\">" << num(kmax) << "</text>\n";
  detail::axis_labels(out, f, "K", "cond(H^T H)");

  int legend = 0;
  for (const auto& s : series) {
    std::string band_top, band_bottom, line;
    for (const auto& r : s.rows) {
      if (r.q.empty() || !std::all_of(r.q.begin(), r.q.end(), [](double v) { return std::isfinite(v); }))
        continue;
      const std::string x = num(px(double(r.K)));
      band_top += x + "," + num(py(r.q.back())) + " ";
      band_bottom = x + "," + num(py(r.q.front())) + " " + band_bottom;
      line += x + "," + num(py(r.q[r.q.size() / 2])) + " ";
    }
    out << "<polygon points=\"" << band_top << band_bottom << "\" fill=\"" << s.color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
        << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(f.left + f.plot_w() - 10) << "\" y=\"" << num(f.top + 18 + 16 * legend++)
        << "\" text-anchor=\"end\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Success rate per (K, S) cell, grey scale (white = 0, black = 1).
/// Cells never visited (past the stopping rule) are left blank.
inline std::string phase_heatmap(const std::vector<PhaseCell>& cells) {
  using detail::num;
  detail::Frame f;
  std::vector<Index> ks, ss;
  for (const auto& c : cells) {
    ks.push_back(c.K);
    ss.push_back(c.S);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::sort(ss.begin(), ss.end());
  ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
  std::ostringstream out;
  detail::open(out, f);
  if (ks.empty()) {
    out << "</svg>\n";
    return out.str();
  }
  const double cw = f.plot_w() / double(ks.size()), ch = f.plot_h() / double(ss.size());
  auto col = [&](Index k) { return double(std::lower_bound(ks.begin(), ks.end(), k) - ks.begin()); };
  auto row = [&](Index s) { return double(std::lower_bound(ss.begin(), ss.end(), s) - ss.begin()); };
  for (const auto& c : cells) {
    const int shade = static_cast<int>(std::lround(255.0 * (1.0 - c.success_rate)));
    out << "<rect x=\"" << num(f.left + col(c.K) * cw) << "\" y=\""
        << num(f.top + f.plot_h() - (row(c.S) + 1) * ch) << "\" width=\"" << num(cw) << "\" height=\""
        << num(ch) << "\" fill=\"rgb(" << shade << "," << shade << "," << shade << ")\"/>\n";
  }
  out << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.plot_w())
      << "\" height=\"" << num(f.plot_h()) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num(f.left) << "\" y=\"" << num(f.top + f.plot_h() + 16) << "\">" << ks.front()
      << "</text>\n<text x=\"" << num(f.left + f.plot_w()) << "\" y=\"" << num(f.top + f.plot_h() + 16)
      << "\" text-anchor=\"end\">" << ks.back() << "</text>\n";
  out << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.top + f.plot_h()) << "\" text-anchor=\"end\">"
      << ss.front() << "</text>\n<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.top + 10)
      << "\" text-anchor=\"end\">" << ss.back() << "</text>\n";
  detail::axis_labels(out, f, "K", "S");
  out << "</svg>\n";
  return out.str();
}

}  // namespace maskcs::svg

#endif  // MASKCS_SVG_HPP
