#pragma once

// Linear forward diffusions x_t = alpha(t) x_0 + sigma(t) eps.

#include <span>
#include <string_view>

#include "ikl/common.hpp"
#include "ikl/rng.hpp"

namespace ikl {

enum class ScheduleKind { ve, vp };

/// VE: dx = dw, so alpha = 1 and sigma^2 = t.
/// VP: beta(t) linear from beta_min at t = 0 to beta_max at t = T,
///     alpha = exp(-1/2 int_0^t beta), sigma^2 = 1 - alpha^2.
struct DiffusionSchedule {
  ScheduleKind kind = ScheduleKind::ve;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_min = 1e-3;
  double T = 10.0;

  static DiffusionSchedule ve(double t_min = 1e-3, double T = 10.0);
  static DiffusionSchedule vp(double beta_min = 0.1, double beta_max = 20.0, double t_min = 1e-3,
                              double T = 1.0);

  void validate() const;
  bool contains(double t) const { return t >= t_min && t <= T; }
  double window() const { return T - t_min; }
  /// sigma(T); for VE this is sqrt(T).
  double sigma_max() const;
};

std::string_view to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(std::string_view name);

struct AlphaSigma {
  double alpha;
  double sigma;
};

/// Throws DomainError when t is outside [t_min, T].
AlphaSigma alpha_sigma(const DiffusionSchedule& sched, double t);
/// Same formulas for any t > 0, ignoring the window.
AlphaSigma alpha_sigma_any(const DiffusionSchedule& sched, double t);

Vec sample_transition(const DiffusionSchedule& sched, std::span<const double> x0, double t,
                      std::span<const double> noise);

/// grad_{x_t} log q_t(x_t | x_0) = (alpha x_0 - x_t) / sigma^2
Vec conditional_score(const DiffusionSchedule& sched, std::span<const double> x0,
                      std::span<const double> xt, double t);

enum class WeightingKind { ramp, constant, sigma_squared, inverse_sigma_squared };

std::string_view to_string(WeightingKind k);
WeightingKind weighting_kind_from_string(std::string_view name);

/// ramp: t for t <= 1, 1/t beyond. constant: `scale`. sigma_squared: sigma^2(t).
/// inverse_sigma_squared: 1/sigma^2(t).
/// Every kind is multiplied by `scale`.
struct WeightingFn {
  WeightingKind kind = WeightingKind::constant;
  double scale = 1.0;
};

double weighting(const WeightingFn& w, const DiffusionSchedule& sched, double t);

/// Tweedie posterior mean: (x_t + sigma^2 score) / alpha.
Vec tweedie_denoise(const DiffusionSchedule& sched, std::span<const double> xt, double t,
                    std::span<const double> score);

// Training-time sampling of t on the schedule window. `inv_density` is 1/p(t),
// so mean(f(t) * inv_density) estimates int_{t_min}^{T} f(t) dt.
enum class TimeSampler { uniform, log_uniform };

std::string_view to_string(TimeSampler s);
TimeSampler time_sampler_from_string(std::string_view name);

struct TimeDraw {
  double t;
  double inv_density;
};

TimeDraw draw_time(const DiffusionSchedule& sched, TimeSampler sampler, Rng& rng);

}  // namespace ikl
