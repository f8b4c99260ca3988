#pragma once

// Experiment configuration: one JSON document per run. Every section and key
// is optional; unknown keys are rejected. The resolved document written next
// to a run's outputs contains every field and reproduces the run on its own.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ikl/datasets.hpp"
#include "ikl/diffusion.hpp"
#include "ikl/tensorgrad.hpp"
#include "ikl/training.hpp"

namespace ikl {

struct NetSpec {
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::softplus;
};

enum class GeneratorInit { fresh, tweedie };

std::string_view to_string(GeneratorInit init);

struct GeneratorSpec {
  GeneratorInit init = GeneratorInit::tweedie;
  /// Net shape for fresh generators; Tweedie generators copy the teacher.
  NetSpec net;
  /// Fresh generators only; Tweedie generators use data_dim and sigma(t*).
  std::size_t latent_dim = 2;
  double latent_sigma = 1.0;
  /// sigma(t*) for the Tweedie init (VE: t* = sigma^2).
  double sigma_star = 2.5;
};

struct AuxScoreSpec {
  /// Start s_phi from the teacher's weights instead of a fresh net.
  bool copy_teacher = true;
  NetSpec net;
};

struct EvalSpec {
  /// Held-out data and generator samples per energy-distance evaluation,
  /// made at every metrics row. 0 disables the evaluation.
  std::size_t samples = 1000;
};

struct SdsSpec {
  std::size_t points = 64;
  double init_std = 3.0;
};

struct OracleSpec {
  std::size_t mc_batch = 100000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  DiffusionSchedule schedule = DiffusionSchedule::ve(1e-3, 10.0);
  WeightingFn weighting{WeightingKind::ramp, 1.0};
  ToyDataset dataset = ring_dataset(8, 2.0, 0.1);
  NetSpec teacher_net;
  GeneratorSpec generator;
  AuxScoreSpec phi;
  TrainConfig train;
  EvalSpec eval;
  SdsSpec sds;
  OracleSpec oracle;
  std::optional<std::string> teacher_checkpoint;
  std::optional<std::string> generator_checkpoint;

  void validate() const;
};

/// Throws ConfigError naming the offending key (dotted path) or the parse position.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// A standalone dataset description: the keys of the config's "dataset" section.
ToyDataset parse_dataset(std::string_view text, std::string_view source = "<dataset>");
ToyDataset load_dataset(const std::filesystem::path& path);

}  // namespace ikl
