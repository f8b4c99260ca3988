#pragma once

// JSON persistence for score networks and generators.
//
// Document layout:
//   {"role": "score" | "generator", "layer_sizes": [...], "activation": "...",
//    "params": [...], "data_dim": d, ...generator fields}
// Reals are written with 17 significant digits so a load reproduces every
// parameter bit for bit.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ikl/nets.hpp"
#include "ikl/tensorgrad.hpp"

namespace ikl {

/// %.17g, with non-finite values rejected.
std::string format_real(double v);

std::string score_net_to_json(const ScoreNet& s);
std::string generator_to_json(const Generator& g);

/// `source` names the document in error messages. When `expected_layers` is
/// given, a different shape raises DimensionError naming both shapes.
ScoreNet score_net_from_json(std::string_view text, std::string_view source = "<string>",
                             std::optional<std::span<const std::size_t>> expected_layers = {});
Generator generator_from_json(std::string_view text, std::string_view source = "<string>",
                              std::optional<std::span<const std::size_t>> expected_layers = {});

void save_score_net(const std::filesystem::path& path, const ScoreNet& s);
void save_generator(const std::filesystem::path& path, const Generator& g);
ScoreNet load_score_net(const std::filesystem::path& path,
                        std::optional<std::span<const std::size_t>> expected_layers = {});
Generator load_generator(const std::filesystem::path& path,
                         std::optional<std::span<const std::size_t>> expected_layers = {});

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
/// Throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace ikl
