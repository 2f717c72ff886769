#include "panelcausal/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace panelcausal {

Rgb diverging_color(double value, double max_abs) {
  if (!(max_abs > 0.0) || !std::isfinite(value) || value == 0.0) return {};
  const double t = std::min(std::abs(value) / max_abs, 1.0);
  const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
  if (value > 0.0) return {255, fade, fade};
  return {fade, fade, 255};
}

std::string to_hex(Rgb color) { return fmt::format("#{:02x}{:02x}{:02x}", color.r, color.g, color.b); }

namespace {

std::string escape_xml(const std::string& s) {
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

}  // namespace

std::string render_svg_heatmap(const HeatmapSpec& spec) {
  constexpr int cell = 14;
  constexpr int left = 120;
  constexpr int top = 70;
  const auto rows = spec.values.rows();
  const auto cols = spec.values.cols();
  const auto width = left + cols * cell + 20;
  const auto height = top + rows * cell + 20;

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n", width,
      height, width, height);
  out += fmt::format("<title>{}</title>\n", escape_xml(spec.title));
  out += fmt::format("<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n", left,
                     escape_xml(spec.title));
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto x = left + j * cell + cell / 2;
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"8\" "
        "transform=\"rotate(-90 {} {})\">{}</text>\n",
        x, top - 4, x, top - 4, escape_xml(spec.column_labels.at(static_cast<std::size_t>(j))));
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto y = top + i * cell;
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"end\">{}</text>\n",
        left - 4, y + cell - 4, escape_xml(spec.row_labels.at(static_cast<std::size_t>(i))));
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = spec.values(i, j);
      if (std::isnan(v)) continue;
      out += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{} {}: {}</title></rect>\n",
          left + j * cell, y, cell, cell, to_hex(diverging_color(v, spec.max_abs)),
          escape_xml(spec.row_labels[static_cast<std::size_t>(i)]),
          escape_xml(spec.column_labels[static_cast<std::size_t>(j)]), v);
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace panelcausal
