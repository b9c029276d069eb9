#include "longview/scaling/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace longview::scaling {

namespace {

constexpr double kW = 640, kH = 440;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 52;

struct Axes {
  double x_min, x_max;  // log10 hours
  double y_min = 0, y_max = 100;

  double px(double x) const {
    return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight);
  }
  double py(double y) const {
    return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

}  // namespace

std::string render_figure_svg(const FigureSpec& spec) {
  LinearFit fit = fit_loglinear(spec.points);

  Axes ax;
  double data_min = 1e300, data_max = -1e300;
  for (const auto& p : spec.points) {
    data_min = std::min(data_min, std::log10(p.hours));
    data_max = std::max(data_max, std::log10(p.hours));
  }
  const double ten_year_x = std::log10(10.0 * kHoursPerYear);
  ax.x_min = std::floor(data_min - 0.4);
  ax.x_max = std::ceil(std::max(data_max + 0.4, ten_year_x + 0.4));
  if (fit.slope > 0) {
    double x_cross = (spec.threshold - fit.intercept) / fit.slope;
    if (x_cross < 12.0) ax.x_max = std::max(ax.x_max, std::ceil(x_cross + 0.4));
  }

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
      << "font-family=\"sans-serif\">" << xml_escape(spec.title) << "</text>\n";

  // Confidence band: upper edge left to right, lower edge back, closed.
  const int samples = 64;
  svg << "<polygon fill=\"#9bb8e0\" fill-opacity=\"0.45\" stroke=\"none\" points=\"";
  for (int i = 0; i <= samples; ++i) {
    double x = ax.x_min + (ax.x_max - ax.x_min) * i / samples;
    auto [lo, hi] = confidence_band(fit, x, spec.level);
    svg << fmt(ax.px(x)) << "," << fmt(ax.py(std::clamp(hi, 0.0, 100.0))) << " ";
  }
  for (int i = samples; i >= 0; --i) {
    double x = ax.x_min + (ax.x_max - ax.x_min) * i / samples;
    auto [lo, hi] = confidence_band(fit, x, spec.level);
    svg << fmt(ax.px(x)) << "," << fmt(ax.py(std::clamp(lo, 0.0, 100.0))) << " ";
  }
  svg << "\"/>\n";

  // Axes.
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
      << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (int xt = static_cast<int>(std::ceil(ax.x_min)); xt <= static_cast<int>(std::floor(ax.x_max)); ++xt) {
    double px = ax.px(xt);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << kH - kBottom << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << kH - kBottom + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << kH - kBottom + 20
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">1e" << xt
        << "</text>\n";
  }
  for (int yt = 0; yt <= 100; yt += 20) {
    double py = ax.py(yt);
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << fmt(py) << "\" x2=\"" << kLeft << "\" y2=\""
        << fmt(py) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 9 << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << yt
        << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 14
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">hours of video "
         "(log scale)</text>\n";
  svg << "<text x=\"16\" y=\"" << (kTop + kH - kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 16 " << (kTop + kH - kBottom) / 2 << ")\">accuracy (%)</text>\n";

  // Fit line.
  {
    double y0 = std::clamp(fit.predict(ax.x_min), 0.0, 100.0);
    double y1 = std::clamp(fit.predict(ax.x_max), 0.0, 100.0);
    svg << "<line x1=\"" << fmt(ax.px(ax.x_min)) << "\" y1=\"" << fmt(ax.py(y0)) << "\" x2=\""
        << fmt(ax.px(ax.x_max)) << "\" y2=\"" << fmt(ax.py(y1))
        << "\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>\n";
  }

  // Threshold line.
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(ax.py(spec.threshold)) << "\" x2=\""
      << kW - kRight << "\" y2=\"" << fmt(ax.py(spec.threshold))
      << "\" stroke=\"#b03030\" stroke-dasharray=\"6,4\"/>\n";
  svg << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << fmt(ax.py(spec.threshold) - 5)
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#b03030\">"
      << fmt(spec.threshold) << "%</text>\n";

  // 10-year reference arrow.
  if (ten_year_x > ax.x_min && ten_year_x < ax.x_max) {
    double px = ax.px(ten_year_x);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << kTop + 14 << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    svg << "<polygon fill=\"black\" points=\"" << fmt(px - 5) << "," << kH - kBottom - 12 << " "
        << fmt(px + 5) << "," << kH - kBottom - 12 << " " << fmt(px) << "," << kH - kBottom
        << "\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << kTop + 10
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">10 years</text>\n";
  }

  // Data points.
  for (const auto& p : spec.points)
    svg << "<circle cx=\"" << fmt(ax.px(std::log10(p.hours))) << "\" cy=\""
        << fmt(ax.py(std::clamp(p.accuracy, 0.0, 100.0)))
        << "\" r=\"4\" fill=\"#d07028\" stroke=\"#7a3c10\"/>\n";

  // Crossing annotation, only when the fit improves with data.
  if (fit.slope > 0) {
    Extrapolation ex = invert_threshold(fit, spec.threshold, spec.level);
    double x_cross = std::log10(ex.hours_est);
    std::string label = format_years(ex.years_est, ex.capped) + " years";
    if (x_cross > ax.x_min && x_cross < ax.x_max) {
      double px = ax.px(x_cross);
      svg << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(ax.py(spec.threshold))
          << "\" r=\"5\" fill=\"none\" stroke=\"#b03030\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(ax.py(spec.threshold) + 18)
          << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
          << "fill=\"#b03030\">" << xml_escape(label) << "</text>\n";
    } else {
      svg << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 10
          << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" "
          << "fill=\"#b03030\">crossing: " << xml_escape(label) << "</text>\n";
    }
  }

  svg << "</svg>\n";
  return svg.str();
}

}  // namespace longview::scaling
