#include "ikl/svg.hpp"

#include <cmath>
#include <cstdio>

#include "ikl/checkpoint.hpp"
#include "ikl/common.hpp"

namespace ikl {

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
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

std::string scatter_svg(std::span<const double> xy, const ScatterOptions& opts) {
  if (xy.size() % 2 != 0) throw DimensionError("scatter plot needs 2-D samples");
  if (!(opts.extent > 0.0) || opts.size_px <= 0) throw ConfigError("invalid scatter viewport");
  const double size = opts.size_px;
  const double half = 0.5 * size;
  const double scale = half / opts.extent;
  const std::string s = std::to_string(opts.size_px);

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + s + "\" height=\"" + s +
         "\" viewBox=\"0 0 " + s + " " + s + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + s + "\" height=\"" + s + "\" fill=\"white\"/>\n";
  out += "<g stroke=\"#888888\" stroke-width=\"1\">\n";
  out += "<line x1=\"0\" y1=\"" + fixed(half) + "\" x2=\"" + s + "\" y2=\"" + fixed(half) + "\"/>\n";
  out += "<line x1=\"" + fixed(half) + "\" y1=\"0\" x2=\"" + fixed(half) + "\" y2=\"" + s + "\"/>\n";
  out += "</g>\n";
  if (!opts.title.empty()) {
    out += "<text x=\"8\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" +
           escape_xml(opts.title) + "</text>\n";
  }
  out += "<g fill=\"#1f4e9c\" fill-opacity=\"0.6\">\n";
  const std::string r = fixed(opts.marker_radius);
  for (std::size_t i = 0; i + 1 < xy.size(); i += 2) {
    const double x = xy[i];
    const double y = xy[i + 1];
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (std::abs(x) > opts.extent || std::abs(y) > opts.extent) continue;
    out += "<circle cx=\"" + fixed(half + x * scale) + "\" cy=\"" + fixed(half - y * scale) +
           "\" r=\"" + r + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

void render_scatter(std::span<const double> xy, const std::filesystem::path& path,
                    const ScatterOptions& opts) {
  write_file_atomic(path, scatter_svg(xy, opts));
}

}  // namespace ikl
