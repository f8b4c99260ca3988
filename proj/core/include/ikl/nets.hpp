#pragma once

// Score networks s_phi(x, t), one-step generators g_theta(z), and the common
// score-model interface shared by trained networks and analytic oracles.

#include <optional>
#include <span>

#include "ikl/common.hpp"
#include "ikl/diffusion.hpp"
#include "ikl/tensorgrad.hpp"

namespace ikl {

/// Anything that evaluates a time-indexed score. Batched inputs are row-major
/// (batch x data_dim); `ts` holds one time per row.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual std::size_t data_dim() const = 0;
  virtual void score_batch(std::span<const double> xs, std::span<const double> ts,
                           std::span<double> out) const = 0;

  Vec score(std::span<const double> x, double t) const;
};

/// MLP over the concatenation [x, log t]; output is the score itself.
struct ScoreNet {
  MlpNet net;
  std::size_t data_dim = 0;

  void validate() const;
};

ScoreNet make_score_net(std::size_t data_dim, std::span<const std::size_t> hidden,
                        Activation activation, Rng& rng);

/// Writes the (batch x (d + 1)) network input for rows xs at times ts.
void score_net_inputs(std::size_t data_dim, std::span<const double> xs,
                      std::span<const double> ts, Vec& inputs);

Vec score_eval(const ScoreNet& s, std::span<const double> x, double t);

/// Non-owning ScoreModel view of a ScoreNet; the net must outlive the view.
class NetScore final : public ScoreModel {
 public:
  explicit NetScore(const ScoreNet& net) : net_(&net) {}
  std::size_t data_dim() const override { return net_->data_dim; }
  void score_batch(std::span<const double> xs, std::span<const double> ts,
                   std::span<double> out) const override;

 private:
  const ScoreNet* net_;
};

/// x = net(z) for plain generators. When `t_star` is set the generator is the
/// Tweedie residual form x = z + residual_scale * net([z, log t_star]), whose
/// net has score-network shape.
struct Generator {
  MlpNet net;
  std::size_t latent_dim = 0;
  std::size_t data_dim = 0;
  double latent_sigma = 1.0;
  std::optional<double> t_star;
  double residual_scale = 0.0;

  bool is_residual() const { return t_star.has_value(); }
  void validate() const;
};

Generator make_generator(std::size_t latent_dim, std::size_t data_dim,
                         std::span<const std::size_t> hidden, Activation activation,
                         double latent_sigma, Rng& rng);

/// 1-D generator x = shift + scale * z as a single affine layer
/// (params = {scale, shift}).
Generator affine_generator(double shift, double scale, double latent_sigma = 1.0);

Vec generate(const Generator& g, std::span<const double> z);

/// Draws z ~ N(0, latent_sigma^2 I) row by row.
Vec sample_latents(const Generator& g, std::size_t batch, Rng& rng);

/// Batched generator evaluation with reverse mode.
class GeneratorWorkspace {
 public:
  std::span<const double> forward(const Generator& g, std::span<const double> zs,
                                  std::size_t batch);
  /// Accumulates d(loss)/d(theta) into param_grad given d(loss)/dx per row.
  void backward(const Generator& g, std::span<const double> output_grad,
                std::span<double> param_grad, std::span<double> latent_grad = {});

 private:
  MlpWorkspace mlp_;
  Vec inputs_;
  Vec outputs_;
  Vec net_grad_;
  Vec net_input_grad_;
  std::size_t batch_ = 0;
};

/// Generator initialized to the teacher's denoiser at t_star:
/// x = z + sigma^2(t*) s_teacher(z, t*), z ~ N(0, sigma^2(t*) I). The net is a
/// trainable copy of the teacher's parameters.
Generator init_generator_from_teacher(const ScoreNet& teacher, const DiffusionSchedule& sched,
                                      double t_star);

}  // namespace ikl
