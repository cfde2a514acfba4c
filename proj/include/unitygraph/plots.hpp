#pragma once

// Minimal static SVG output: line charts, heatmaps and skeleton overlays.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "unitygraph/matrix.hpp"
#include "unitygraph/motion.hpp"

namespace unitygraph::plot {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};

struct Series {
  std::string name;
  std::vector<std::optional<double>> values;
};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string line_chart(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                              const std::string& y_label, bool log_y = false) {
  const double W = 640, H = 400, L = 70, R = 20, Tm = 40, B = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  auto tr = [&](double v) { return log_y ? std::log10(std::max(v, 1e-12)) : v; };
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (const auto& v : s.values)
      if (v && std::isfinite(*v)) {
        lo = std::min(lo, tr(*v));
        hi = std::max(hi, tr(*v));
      }
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;
  const double xs = n > 1 ? (W - L - R) / static_cast<double>(n - 1) : 0.0;
  auto px = [&](std::size_t i) { return L + xs * static_cast<double>(i); };
  auto py = [&](double v) { return H - B - (tr(v) - lo) / (hi - lo) * (H - Tm - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double y = H - B - (v - lo) / (hi - lo) * (H - Tm - B);
    std::ostringstream lab;
    lab.precision(3);
    lab << (log_y ? std::pow(10.0, v) : v);
    os << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << lab.str() << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2 << ")\">"
     << escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      const auto& v = series[s].values[i];
      if (v && std::isfinite(*v)) pts << px(i) << "," << py(*v) << " ";
    }
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    os << "<text x=\"" << W - R - 4 << "\" y=\"" << Tm + 14 * (s + 1) << "\" text-anchor=\"end\" fill=\"" << colour << "\">"
       << escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Cells coloured from white (0) to dark blue (max); empty cells grey.
inline std::string heatmap(const std::string& title, const Matrix<double>& values, const Matrix<double>& mask,
                           const std::string& row_label, const std::string& col_label) {
  const double cell = std::clamp(480.0 / static_cast<double>(std::max<std::size_t>(values.cols(), 1)), 4.0, 28.0);
  const double L = 60, Tm = 40;
  const double W = L + cell * static_cast<double>(values.cols()) + 20;
  const double H = Tm + cell * static_cast<double>(values.rows()) + 40;
  double hi = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i] != 0) hi = std::max(hi, values[i]);
  if (hi <= 0) hi = 1;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c) {
      std::string fill = "#dddddd";
      if (mask(r, c) != 0) {
        const double t = std::clamp(values(r, c) / hi, 0.0, 1.0);
        const int red = static_cast<int>(255 - 225 * t), green = static_cast<int>(255 - 180 * t), blue = static_cast<int>(255 - 75 * t);
        std::ostringstream col;
        col << "rgb(" << red << "," << green << "," << blue << ")";
        fill = col.str();
      }
      os << "<rect x=\"" << L + cell * static_cast<double>(c) << "\" y=\"" << Tm + cell * static_cast<double>(r)
         << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"" << fill << "\"/>\n";
    }
  os << "<text x=\"" << L + cell * static_cast<double>(values.cols()) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape(col_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << Tm + cell * static_cast<double>(values.rows()) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << Tm + cell * static_cast<double>(values.rows()) / 2 << ")\">" << escape(row_label) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

/// Side view (x horizontal, z up) of every person. The last observed frame is
/// grey, predicted frames blue with rising opacity, ground truth (if given) red.
inline std::string skeleton_overlay(const std::string& title, const MotionSequence& observed, const MotionSequence& predicted,
                                    const MotionSequence* truth = nullptr) {
  const double W = 720, H = 360, pad = 30;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, zlo = xlo, zhi = -xlo;
  auto scan = [&](const MotionSequence& s) {
    for (std::size_t n = 0; n < s.persons(); ++n)
      for (std::size_t f = 0; f < s.frames(); ++f)
        for (std::size_t j = 0; j < s.joints(); ++j) {
          xlo = std::min(xlo, s.at(n, f, j, 0));
          xhi = std::max(xhi, s.at(n, f, j, 0));
          zlo = std::min(zlo, s.at(n, f, j, 2));
          zhi = std::max(zhi, s.at(n, f, j, 2));
        }
  };
  scan(observed);
  scan(predicted);
  if (truth != nullptr) scan(*truth);
  const double span = std::max({xhi - xlo, zhi - zlo, 1e-6});
  const double scale = std::min((W - 2 * pad) / span, (H - 2 * pad - 20) / std::max(zhi - zlo, 1e-6));
  auto px = [&](double x) { return pad + (x - xlo) * scale; };
  auto pz = [&](double z) { return H - pad - (z - zlo) * scale; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  auto draw = [&](const MotionSequence& s, std::size_t f, const char* colour, double opacity) {
    for (std::size_t n = 0; n < s.persons(); ++n)
      for (const auto& [a, b] : s.skeleton().edges)
        os << "<line x1=\"" << px(s.at(n, f, a, 0)) << "\" y1=\"" << pz(s.at(n, f, a, 2)) << "\" x2=\"" << px(s.at(n, f, b, 0))
           << "\" y2=\"" << pz(s.at(n, f, b, 2)) << "\" stroke=\"" << colour << "\" stroke-opacity=\"" << opacity
           << "\" stroke-width=\"1.5\"/>\n";
  };
  draw(observed, observed.frames() - 1, "#555555", 1.0);
  const std::size_t P = predicted.frames();
  const std::size_t stride = std::max<std::size_t>(1, P / 5);
  for (std::size_t f = stride - 1; f < P; f += stride) {
    const double op = 0.3 + 0.7 * static_cast<double>(f + 1) / static_cast<double>(P);
    if (truth != nullptr && f < truth->frames()) draw(*truth, f, "#d62728", op * 0.6);
    draw(predicted, f, "#1f77b4", op);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace unitygraph::plot
