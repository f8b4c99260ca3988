#pragma once

// Fixed-shape multi-layer perceptrons with exact reverse-mode gradients,
// the Adam optimizer and a central-difference gradient checker.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ikl/common.hpp"
#include "ikl/rng.hpp"

namespace ikl {

enum class Activation { softplus, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Parameters are laid out per layer as the row-major (out x in) weight matrix
/// followed by the out biases. Hidden layers use `activation`, the output
/// layer is the identity.
struct MlpNet {
  std::vector<std::size_t> layer_sizes;
  Vec params;
  Activation activation = Activation::softplus;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  static std::size_t param_count(std::span<const std::size_t> layer_sizes);

  /// Throws DimensionError / DomainError when an invariant is broken.
  void validate() const;
};

/// All-zero parameters.
MlpNet zero_mlp(std::vector<std::size_t> layer_sizes, Activation activation);

/// Weights ~ N(0, 1/fan_in), biases zero.
MlpNet init_mlp(std::vector<std::size_t> layer_sizes, Activation activation, Rng& rng);

std::string shape_string(std::span<const std::size_t> layer_sizes);

Vec forward(const MlpNet& net, std::span<const double> input);

struct MlpGradients {
  Vec params;
  Vec input;
};

MlpGradients backward(const MlpNet& net, std::span<const double> input,
                      std::span<const double> output_grad);

// Batched evaluation. Inputs and outputs are row-major (batch x dim). The
// workspace keeps the activations of the last forward pass so backward can
// reuse them; it is not thread-safe and should be owned by one caller.
class MlpWorkspace {
 public:
  std::span<const double> forward(const MlpNet& net, std::span<const double> inputs,
                                  std::size_t batch);

  /// Accumulates (+=) parameter gradients into `param_grad`; writes input
  /// gradients when `input_grad` is non-empty. Must follow forward() on the
  /// same net and batch.
  void backward(const MlpNet& net, std::span<const double> output_grad,
                std::span<double> param_grad, std::span<double> input_grad = {});

 private:
  std::size_t batch_ = 0;
  std::vector<Vec> pre_;    // pre-activations per layer
  std::vector<Vec> slope_;  // activation derivatives per hidden layer
  std::vector<Vec> post_;   // post_[0] = inputs, post_[l + 1] = layer l output
  Vec transposed_;
  Vec delta_;
  Vec delta_prev_;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta0 = 0.0;
  double beta1 = 0.99;
  double eps = 1e-8;

  static AdamState init(std::size_t n, double lr, double beta0 = 0.0, double beta1 = 0.99,
                        double eps = 1e-8);
};

struct AdamResult {
  Vec params;
  AdamState state;
};

/// Bias-corrected Adam update. Non-finite gradients throw DivergenceError.
AdamResult adam_step(const AdamState& state, std::span<const double> params,
                     std::span<const double> grads);
void adam_step_inplace(AdamState& state, std::span<double> params, std::span<const double> grads);

Vec finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> params, double h);

double l2_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

/// ema <- decay * ema + (1 - decay) * params
void ema_update(std::span<double> ema, std::span<const double> params, double decay);

}  // namespace ikl
