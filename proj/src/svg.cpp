#include "headprobe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace headprobe {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string num(double v) { return fmt("%.2f", v); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" fill=\"#ffffff\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" +
         escape(s) + "</text>\n";
}

// Linear ramp from white to a deep blue.
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto channel = [&](int lo, int hi) {
    return static_cast<int>(std::lround(lo + (hi - lo) * t));
  };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(255, 8), channel(255, 48), channel(255, 107));
  return buf;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& y_label,
                           const std::vector<CurveSeries>& series) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = 0.0;
  double y_hi = 0.0;
  for (const auto& s : series) {
    for (double x : s.x) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
    }
    for (double y : s.y) {
      if (std::isfinite(y)) {
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    }
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  const auto py = [&](double y) { return kTop + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

  std::string out = header(kWidth, kHeight);
  out += text(kWidth / 2, 22, title);
  out += "<g stroke=\"#333333\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(kTop + ph) + "\"/>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
    out += text(kLeft - 6, py(yv) + 4, fmt("%.3g", yv), "end");
    out += text(px(xv), kTop + ph + 16, fmt("%.2f", xv));
  }
  out += text(kLeft + pw / 2, kHeight - 12, "alpha");
  out += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    for (std::size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
      if (!points.empty()) points += ' ';
      points += num(px(s.x[j])) + "," + num(py(s.y[j]));
    }
    out += "<polyline class=\"series\" fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 14 + 16 * static_cast<double>(i);
    out += "<line x1=\"" + num(kLeft + pw + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
           num(kLeft + pw + 30) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += text(kLeft + pw + 34, ly, s.label, "start");
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap_svg(const std::string& title, const HeatmapGrid& grid) {
  const auto rows = grid.values.rows();
  const auto cols = grid.values.cols();
  const double cell_w = 30;
  const double cell_h = 26;
  const double width = kLeft + cell_w * static_cast<double>(cols) + 120;
  const double height = kTop + cell_h * static_cast<double>(rows) + kBottom;
  const double vmax = grid.values.size() > 0 ? grid.values.maxCoeff() : 0.0;

  std::string out = header(width, height);
  out += text(width / 2, 22, title);
  for (Eigen::Index l = 0; l < rows; ++l) {
    const double y = kTop + cell_h * static_cast<double>(l);
    out += text(kLeft - 6, y + cell_h / 2 + 4, "layer " + std::to_string(l), "end");
    for (Eigen::Index a = 0; a < cols; ++a) {
      const double v = grid.values(l, a);
      const double x = kLeft + cell_w * static_cast<double>(a);
      out += "<rect class=\"cell\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell_w) +
             "\" height=\"" + num(cell_h) + "\" fill=\"" + ramp(vmax > 0 ? v / vmax : 0.0) +
             "\"><title>" + fmt("%.6g", v) + "</title></rect>\n";
    }
  }
  for (Eigen::Index a = 0; a < cols; ++a) {
    if (a % 3 != 0 && a != cols - 1) continue;
    const double x = kLeft + cell_w * (static_cast<double>(a) + 0.5);
    out += text(x, kTop + cell_h * static_cast<double>(rows) + 16,
                fmt("%.2f", grid.alphas[static_cast<std::size_t>(a)]));
  }
  out += text(kLeft + cell_w * static_cast<double>(cols) / 2, height - 12, "alpha");
  const double lx = kLeft + cell_w * static_cast<double>(cols) + 20;
  out += "<rect x=\"" + num(lx) + "\" y=\"" + num(kTop) + "\" width=\"14\" height=\"14\" fill=\"" +
         ramp(1.0) + "\"/>\n";
  out += text(lx + 20, kTop + 11, fmt("%.3g", vmax), "start");
  out += "<rect x=\"" + num(lx) + "\" y=\"" + num(kTop + 20) + "\" width=\"14\" height=\"14\" fill=\"" +
         ramp(0.0) + "\" stroke=\"#999999\"/>\n";
  out += text(lx + 20, kTop + 31, "0", "start");
  out += "</svg>\n";
  return out;
}

}  // namespace headprobe
