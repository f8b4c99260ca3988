#include "ikl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ikl {
namespace {

std::string window_message(const DiffusionSchedule& s, double t) {
  std::ostringstream os;
  os << "time " << t << " outside the diffusion window [" << s.t_min << ", " << s.T << "]";
  return os.str();
}

void check_window(const DiffusionSchedule& s, double t) {
  if (!(s.contains(t))) throw DomainError(window_message(s, t));
}

}  // namespace

DiffusionSchedule DiffusionSchedule::ve(double t_min, double T) {
  DiffusionSchedule s;
  s.kind = ScheduleKind::ve;
  s.t_min = t_min;
  s.T = T;
  s.validate();
  return s;
}

DiffusionSchedule DiffusionSchedule::vp(double beta_min, double beta_max, double t_min, double T) {
  DiffusionSchedule s{ScheduleKind::vp, beta_min, beta_max, t_min, T};
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (!(t_min > 0.0)) throw DomainError("schedule t_min must be positive");
  if (!(T > t_min)) throw DomainError("schedule T must exceed t_min");
  if (kind == ScheduleKind::vp && !(beta_min > 0.0 && beta_max > 0.0))
    throw DomainError("VP schedule needs positive beta_min and beta_max");
}

double DiffusionSchedule::sigma_max() const { return alpha_sigma_any(*this, T).sigma; }

std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::ve ? "VE" : "VP"; }

ScheduleKind schedule_kind_from_string(std::string_view name) {
  if (name == "VE" || name == "ve") return ScheduleKind::ve;
  if (name == "VP" || name == "vp") return ScheduleKind::vp;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "' (expected VE or VP)");
}

AlphaSigma alpha_sigma_any(const DiffusionSchedule& s, double t) {
  if (!(t > 0.0)) throw DomainError("diffusion time must be positive");
  if (s.kind == ScheduleKind::ve) return {1.0, std::sqrt(t)};
  const double integral = s.beta_min * t + 0.5 * (s.beta_max - s.beta_min) * t * t / s.T;
  const double alpha = std::exp(-0.5 * integral);
  // 1 - alpha^2 = -expm1(-integral) keeps precision as t -> 0.
  return {alpha, std::sqrt(-std::expm1(-integral))};
}

AlphaSigma alpha_sigma(const DiffusionSchedule& s, double t) {
  check_window(s, t);
  return alpha_sigma_any(s, t);
}

Vec sample_transition(const DiffusionSchedule& sched, std::span<const double> x0, double t,
                      std::span<const double> noise) {
  require_dim(noise.size(), x0.size(), "sample_transition noise");
  const auto [a, s] = alpha_sigma(sched, t);
  Vec xt(x0.size());
  for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = a * x0[i] + s * noise[i];
  return xt;
}

Vec conditional_score(const DiffusionSchedule& sched, std::span<const double> x0,
                      std::span<const double> xt, double t) {
  require_dim(xt.size(), x0.size(), "conditional_score x_t");
  const auto [a, s] = alpha_sigma(sched, t);
  const double inv_var = 1.0 / (s * s);
  Vec out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a * x0[i] - xt[i]) * inv_var;
  return out;
}

std::string_view to_string(WeightingKind k) {
  switch (k) {
    case WeightingKind::ramp: return "ramp";
    case WeightingKind::constant: return "constant";
    case WeightingKind::sigma_squared: return "sigma_squared";
    case WeightingKind::inverse_sigma_squared: return "inverse_sigma_squared";
  }
  return "constant";
}

WeightingKind weighting_kind_from_string(std::string_view name) {
  if (name == "ramp") return WeightingKind::ramp;
  if (name == "constant") return WeightingKind::constant;
  if (name == "sigma_squared") return WeightingKind::sigma_squared;
  if (name == "inverse_sigma_squared") return WeightingKind::inverse_sigma_squared;
  throw ConfigError("unknown weighting '" + std::string(name) +
                    "' (expected ramp, constant, sigma_squared or inverse_sigma_squared)");
}

double weighting(const WeightingFn& w, const DiffusionSchedule& sched, double t) {
  if (!(t > 0.0)) throw DomainError("weighting needs t > 0");
  switch (w.kind) {
    case WeightingKind::ramp: return w.scale * (t <= 1.0 ? t : 1.0 / t);
    case WeightingKind::constant: return w.scale;
    case WeightingKind::sigma_squared: {
      const double s = alpha_sigma_any(sched, t).sigma;
      return w.scale * s * s;
    }
    case WeightingKind::inverse_sigma_squared: {
      const double s = alpha_sigma_any(sched, t).sigma;
      return w.scale / (s * s);
    }
  }
  return w.scale;
}

Vec tweedie_denoise(const DiffusionSchedule& sched, std::span<const double> xt, double t,
                    std::span<const double> score) {
  require_dim(score.size(), xt.size(), "tweedie_denoise score");
  const auto [a, s] = alpha_sigma(sched, t);
  Vec out(xt.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (xt[i] + s * s * score[i]) / a;
  return out;
}

std::string_view to_string(TimeSampler s) {
  return s == TimeSampler::uniform ? "uniform" : "log_uniform";
}

TimeSampler time_sampler_from_string(std::string_view name) {
  if (name == "uniform") return TimeSampler::uniform;
  if (name == "log_uniform") return TimeSampler::log_uniform;
  throw ConfigError("unknown time sampler '" + std::string(name) +
                    "' (expected uniform or log_uniform)");
}

TimeDraw draw_time(const DiffusionSchedule& sched, TimeSampler sampler, Rng& rng) {
  const double u = rng.uniform();
  if (sampler == TimeSampler::uniform) {
    return {sched.t_min + u * sched.window(), sched.window()};
  }
  const double log_span = std::log(sched.T / sched.t_min);
  const double t = std::min(sched.T, sched.t_min * std::exp(u * log_span));
  return {t, t * log_span};
}

}  // namespace ikl
