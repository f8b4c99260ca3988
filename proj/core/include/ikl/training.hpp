#pragma once

// Denoising score matching, the integral-KL generator gradient, its two
// degenerate cases (point-mass generator, time-zero weighting) and the
// alternating distillation loop built from them.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ikl/analytic.hpp"
#include "ikl/diffusion.hpp"
#include "ikl/nets.hpp"
#include "ikl/tensorgrad.hpp"

namespace ikl {

struct TrainConfig {
  double lr_phi = 1e-3;
  double lr_theta = 1e-4;
  double beta0 = 0.0;
  double beta1 = 0.99;
  double adam_eps = 1e-8;
  std::size_t batch_size = 256;
  std::size_t iterations = 1000;
  std::size_t phi_steps_per_theta_step = 1;
  /// DSM steps on the initial generator before the first theta update.
  std::size_t phi_warmup_steps = 0;
  std::uint64_t seed = 0;
  double ema_decay = 0.999;
  TimeSampler time_sampler = TimeSampler::uniform;
  /// Evaluate every DSM row at +eps and -eps.
  bool antithetic_noise = false;
  /// Cosine decay of both learning rates to lr * lr_floor over the run.
  bool cosine_lr = false;
  double lr_floor = 0.0;
  /// Weighting for the s_phi DSM phase; defaults to the instruct weighting.
  std::optional<WeightingFn> dsm_weighting;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;
  /// Abort when a gradient norm exceeds this.
  double max_grad_norm = 1e4;
  /// Abort when the DSM loss exceeds this.
  double max_loss = 1e6;

  void validate() const;
  /// Learning-rate multiplier for the given 1-based step.
  double lr_factor(std::size_t step, std::size_t total) const;
};

struct MetricsRecord {
  std::size_t iteration = 0;
  std::optional<double> dsm_loss;
  std::optional<double> instruct_grad_norm;
  std::optional<double> ikl_estimate;
  std::optional<double> energy_distance;
  double wall_seconds = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "iteration,dsm_loss,instruct_grad_norm,ikl_estimate,energy_distance,wall_seconds";

/// CSV with kMetricsHeader; absent values are empty fields, reals use %.17g.
std::string metrics_csv(std::span<const MetricsRecord> rows);

/// Optional observers of a run. Training never depends on their results.
struct RunHooks {
  std::function<std::optional<double>(const Generator&)> energy_distance;
  std::function<std::optional<double>(const Generator&)> ikl_estimate;
  std::function<void(std::size_t iteration, const Generator& ema, const ScoreNet& phi)> checkpoint;
  std::function<void(std::size_t iteration, const ScoreNet& ema)> teacher_checkpoint;
  std::function<void(const MetricsRecord&)> on_metrics;
  /// Fill wall_seconds from a clock; off by default so metrics files are reproducible.
  bool record_wall_time = false;
};

struct LossAndGrad {
  double loss = 0.0;
  Vec grad;
};

/// Reusable buffers for the DSM objective.
class DsmObjective {
 public:
  /// Monte-Carlo estimate of the time-averaged weighted DSM loss with one
  /// (t, eps) draw per row of `batch_x0` (row-major, batch x d). Rows draw t
  /// then eps. Gradient is accumulated into `grad` (resized and zeroed).
  double evaluate(const ScoreNet& s, std::span<const double> batch_x0, const DiffusionSchedule& sched,
                  const WeightingFn& w, TimeSampler sampler, Rng& rng, Vec& grad);

  /// Pair every row with its mirrored noise draw -eps. The estimate stays
  /// unbiased; the term linear in eps, which dominates at small t, cancels.
  void set_antithetic(bool on) { antithetic_ = on; }

 private:
  bool antithetic_ = false;
  MlpWorkspace ws_;
  Vec xt_;
  Vec ts_;
  Vec scale_;
  Vec eps_;
  Vec inputs_;
  Vec out_grad_;
};

LossAndGrad dsm_loss_and_grad(const ScoreNet& s, std::span<const double> batch_x0,
                              const DiffusionSchedule& sched, const WeightingFn& w, Rng& rng,
                              TimeSampler sampler = TimeSampler::uniform);

/// Draws `batch` data points (row-major) from the training distribution.
using BatchSampler = std::function<Vec(std::size_t batch)>;

struct TeacherResult {
  ScoreNet ema;
  ScoreNet raw;
  std::vector<MetricsRecord> metrics;
};

TeacherResult train_teacher(const BatchSampler& data, const ScoreNet& init, const TrainConfig& cfg,
                            const DiffusionSchedule& sched, const WeightingFn& w,
                            const RunHooks& hooks = {});

/// Mean gradient and, when requested, the per-component standard error of
/// the per-sample contributions.
struct GradEstimate {
  Vec mean;
  Vec std_error;
};

/// Reusable buffers for the integral-KL generator gradient.
class InstructGradient {
 public:
  /// grad_theta = int w(t) E[(s_phi(x_t, t) - s_teacher(x_t, t)) dx_t/dtheta] dt with
  /// z, then t, then eps drawn per row. The score difference is a constant
  /// during backprop.
  GradEstimate estimate(const Generator& g, const ScoreModel& s_phi, const ScoreModel& teacher,
                        const DiffusionSchedule& sched, const WeightingFn& w, std::size_t batch,
                        Rng& rng, TimeSampler sampler, bool with_std_error);

 private:
  GeneratorWorkspace gen_ws_;
  Vec z_;
  Vec x0_;
  Vec xt_;
  Vec ts_;
  Vec coeff_;
  Vec phi_out_;
  Vec teacher_out_;
  Vec out_grad_;
};

GradEstimate instruct_grad_theta(const Generator& g, const ScoreModel& s_phi,
                                 const ScoreModel& teacher, const DiffusionSchedule& sched,
                                 const WeightingFn& w, std::size_t batch, Rng& rng,
                                 TimeSampler sampler = TimeSampler::uniform,
                                 bool with_std_error = true);

/// Point-mass generator x0 = theta: the generator score is the conditional
/// score -eps/sigma(t), so no auxiliary network is needed.
GradEstimate sds_grad_theta(std::span<const double> point, const ScoreModel& teacher,
                            const DiffusionSchedule& sched, const WeightingFn& w,
                            std::size_t batch, Rng& rng, TimeSampler sampler = TimeSampler::uniform);

/// E_z[(s_g(x) - s_d(x)) dx/dtheta] at x = g(z) with exact densities: the
/// descent direction of KL(p_g || p_d), i.e. the instruct gradient with all
/// weight at t = 0.
GradEstimate gan_kl_grad_theta(const Generator& g, const GaussianFamily& p_d,
                               const GaussianFamily& p_g, std::size_t batch, Rng& rng);

struct DistillResult {
  Generator ema;
  Generator raw;
  ScoreNet phi;
  std::vector<MetricsRecord> metrics;
};

/// Alternates phi_steps_per_theta_step DSM updates of s_phi on fresh generator
/// samples with one generator update along the integral-KL gradient. Returns
/// the EMA generator.
DistillResult diff_instruct(const Generator& g0, const ScoreNet& phi0, const ScoreModel& teacher,
                            const TrainConfig& cfg, const DiffusionSchedule& sched,
                            const WeightingFn& w, const RunHooks& hooks = {});

struct SdsResult {
  Vec points;  // row-major (count x d)
  std::vector<MetricsRecord> metrics;
};

/// Independent point-mass generators optimized with the SDS gradient and Adam.
SdsResult sds_optimize(std::span<const double> init_points, std::size_t dim, const ScoreModel& teacher,
                       const TrainConfig& cfg, const DiffusionSchedule& sched, const WeightingFn& w);

}  // namespace ikl
