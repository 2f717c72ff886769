#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace panelcausal {

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 255;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// White at zero, pure red at +max_abs, pure blue at -max_abs, linear in between.
/// Values beyond max_abs saturate.
Rgb diverging_color(double value, double max_abs);

/// "#rrggbb".
std::string to_hex(Rgb color);

/// Labelled grid of values; NaN cells are left undrawn.
struct HeatmapSpec {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  Eigen::MatrixXd values;
  double max_abs = 1.0;
};

std::string render_svg_heatmap(const HeatmapSpec& spec);

}  // namespace panelcausal
