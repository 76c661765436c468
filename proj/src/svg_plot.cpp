#include <algorithm>
#include <cstdio>
#include <limits>

#include "vle/evaluation.hpp"

namespace vle::eval {
namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#444444"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string line_plot_svg(const PlotSpec& spec, const std::vector<Series>& series) {
  double x0, x1, y0, y1;
  if (spec.bounds) {
    x0 = (*spec.bounds)[0]; x1 = (*spec.bounds)[1]; y0 = (*spec.bounds)[2]; y1 = (*spec.bounds)[3];
  } else {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    for (const Series& s : series) {
      for (double v : s.x) { x0 = std::min(x0, v); x1 = std::max(x1, v); }
      for (double v : s.y) { y0 = std::min(y0, v); y1 = std::max(y1, v); }
    }
    if (!(x0 < x1)) { x0 = x0 == x0 && x0 < 1e300 ? x0 - 0.5 : 0; x1 = x0 + 1; }
    if (!(y0 < y1)) { y0 = y0 == y0 && y0 < 1e300 ? y0 - 0.5 : 0; y1 = y0 + 1; }
    y0 = std::min(y0, 0.0);
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                    "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(spec.title) + "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    svg += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(px(fx)) + "\" y2=\"" + num(kTop + ph) +
           "\" stroke=\"#e5e5e5\"/>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" + num(py(fy)) +
           "\" stroke=\"#e5e5e5\"/>\n";
    svg += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" + tick(fx) + "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" + tick(fy) + "</text>\n";
  }
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 18) + "\" text-anchor=\"middle\">" + xml_escape(spec.x_label) + "</text>\n";
  svg += "<text transform=\"translate(18 " + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         xml_escape(spec.y_label) + "</text>\n";
  if (spec.diagonal) {
    svg += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(y0)) + "\" x2=\"" + num(px(x1)) + "\" y2=\"" + num(py(y1)) +
           "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j) {
      pts += num(px(s.x[j])) + "," + num(py(s.y[j])) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.8\" points=\"" + pts + "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    svg += "<line x1=\"" + num(kLeft + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kLeft + pw + 32) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kLeft + pw + 36) + "\" y=\"" + num(ly + 4) + "\">" + xml_escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace vle::eval
