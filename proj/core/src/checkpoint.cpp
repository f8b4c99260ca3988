#include "ikl/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json_util.hpp"

namespace ikl {

using detail::get_field;
using detail::Json;

std::string format_real(double v) {
  if (!std::isfinite(v)) throw DivergenceError("cannot serialize a non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void append_net_fields(std::string& out, const MlpNet& net) {
  out += "  \"layer_sizes\": [";
  for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(net.layer_sizes[i]);
  }
  out += "],\n  \"activation\": \"" + std::string(to_string(net.activation)) + "\",\n  \"params\": [";
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    out += i % 4 == 0 ? "\n    " : " ";
    out += format_real(net.params[i]);
    if (i + 1 < net.params.size()) out += ",";
  }
  out += "\n  ]";
}

MlpNet net_from_json(const Json& doc, std::string_view source,
                     std::optional<std::span<const std::size_t>> expected_layers) {
  if (!doc.is_object()) throw ConfigError(std::string(source) + ": checkpoint must be a JSON object");
  MlpNet net;
  net.layer_sizes = get_field<std::vector<std::size_t>>(doc, "layer_sizes", source);
  net.activation = activation_from_string(get_field<std::string>(doc, "activation", source));
  net.params = get_field<Vec>(doc, "params", source);
  if (expected_layers) {
    const std::span<const std::size_t> want = *expected_layers;
    if (!std::equal(want.begin(), want.end(), net.layer_sizes.begin(), net.layer_sizes.end())) {
      throw DimensionError(std::string(source) + ": checkpoint layer_sizes " +
                           shape_string(net.layer_sizes) + " do not match expected " +
                           shape_string(want));
    }
  }
  try {
    net.validate();
  } catch (const std::exception& e) {
    throw DimensionError(std::string(source) + ": " + e.what());
  }
  return net;
}

std::string optional_role(const Json& doc, std::string_view source) {
  if (!doc.is_object() || !doc.contains("role")) return {};
  return get_field<std::string>(doc, "role", source);
}

}  // namespace

std::string score_net_to_json(const ScoreNet& s) {
  s.validate();
  std::string out = "{\n  \"role\": \"score\",\n";
  append_net_fields(out, s.net);
  out += ",\n  \"data_dim\": " + std::to_string(s.data_dim) + "\n}\n";
  return out;
}

std::string generator_to_json(const Generator& g) {
  g.validate();
  std::string out = "{\n  \"role\": \"generator\",\n";
  append_net_fields(out, g.net);
  out += ",\n  \"latent_dim\": " + std::to_string(g.latent_dim);
  out += ",\n  \"data_dim\": " + std::to_string(g.data_dim);
  out += ",\n  \"latent_sigma\": " + format_real(g.latent_sigma);
  out += ",\n  \"t_star\": " + (g.t_star ? format_real(*g.t_star) : std::string("null"));
  out += ",\n  \"residual_scale\": " + format_real(g.residual_scale) + "\n}\n";
  return out;
}

ScoreNet score_net_from_json(std::string_view text, std::string_view source,
                             std::optional<std::span<const std::size_t>> expected_layers) {
  const Json doc = detail::parse_json(text, source);
  const std::string role = optional_role(doc, source);
  if (!role.empty() && role != "score") {
    throw ConfigError(std::string(source) + ": expected a score checkpoint, found role '" + role + "'");
  }
  ScoreNet s;
  s.net = net_from_json(doc, source, expected_layers);
  s.data_dim = doc.contains("data_dim") ? get_field<std::size_t>(doc, "data_dim", source)
                                        : s.net.output_dim();
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw DimensionError(std::string(source) + ": " + e.what());
  }
  return s;
}

Generator generator_from_json(std::string_view text, std::string_view source,
                              std::optional<std::span<const std::size_t>> expected_layers) {
  const Json doc = detail::parse_json(text, source);
  const std::string role = optional_role(doc, source);
  if (!role.empty() && role != "generator") {
    throw ConfigError(std::string(source) + ": expected a generator checkpoint, found role '" +
                      role + "'");
  }
  Generator g;
  g.net = net_from_json(doc, source, expected_layers);
  g.data_dim = doc.contains("data_dim") ? get_field<std::size_t>(doc, "data_dim", source)
                                        : g.net.output_dim();
  if (doc.contains("t_star") && !doc.at("t_star").is_null()) {
    g.t_star = get_field<double>(doc, "t_star", source);
  }
  g.latent_dim = doc.contains("latent_dim") ? get_field<std::size_t>(doc, "latent_dim", source)
                                            : (g.t_star ? g.data_dim : g.net.input_dim());
  g.latent_sigma = doc.contains("latent_sigma") ? get_field<double>(doc, "latent_sigma", source) : 1.0;
  g.residual_scale =
      doc.contains("residual_scale") ? get_field<double>(doc, "residual_scale", source) : 0.0;
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw DimensionError(std::string(source) + ": " + e.what());
  }
  return g;
}

void save_score_net(const std::filesystem::path& path, const ScoreNet& s) {
  write_file_atomic(path, score_net_to_json(s));
}

void save_generator(const std::filesystem::path& path, const Generator& g) {
  write_file_atomic(path, generator_to_json(g));
}

ScoreNet load_score_net(const std::filesystem::path& path,
                        std::optional<std::span<const std::size_t>> expected_layers) {
  return score_net_from_json(read_file(path), path.string(), expected_layers);
}

Generator load_generator(const std::filesystem::path& path,
                         std::optional<std::span<const std::size_t>> expected_layers) {
  return generator_from_json(read_file(path), path.string(), expected_layers);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ikl
