#pragma once

// Scatter plots of 2-D samples as standalone SVG.

#include <filesystem>
#include <span>
#include <string>

namespace ikl {

struct ScatterOptions {
  /// Square data window [-extent, extent]^2 mapped onto the canvas.
  double extent = 4.0;
  int size_px = 480;
  double marker_radius = 1.5;
  std::string title;
};

/// Points outside the window are dropped. Coordinates are printed with fixed
/// precision, so equal inputs give equal bytes.
std::string scatter_svg(std::span<const double> xy, const ScatterOptions& opts = {});

void render_scatter(std::span<const double> xy, const std::filesystem::path& path,
                    const ScatterOptions& opts = {});

}  // namespace ikl
