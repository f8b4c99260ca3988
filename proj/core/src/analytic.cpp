#include "ikl/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ikl {

GaussianFamily GaussianFamily::isotropic(std::size_t dim, double mean, double var) {
  GaussianFamily g{Vec(dim, mean), Vec(dim, var)};
  g.validate();
  return g;
}

void GaussianFamily::validate() const {
  if (mean.empty()) throw DimensionError("GaussianFamily needs at least one dimension");
  require_dim(var.size(), mean.size(), "GaussianFamily var");
  for (double v : var) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("GaussianFamily variances must be positive");
  }
}

GaussianFamily diffused_gaussian(const GaussianFamily& g, const DiffusionSchedule& sched, double t) {
  require_dim(g.var.size(), g.mean.size(), "GaussianFamily var");
  const auto [a, s] = alpha_sigma(sched, t);
  GaussianFamily out{Vec(g.dim()), Vec(g.dim())};
  for (std::size_t i = 0; i < g.dim(); ++i) {
    if (g.var[i] < 0.0) throw DomainError("GaussianFamily variances must be non-negative");
    out.mean[i] = a * g.mean[i];
    out.var[i] = a * a * g.var[i] + s * s;
  }
  return out;
}

Vec analytic_score(const GaussianFamily& g, std::span<const double> x) {
  require_dim(x.size(), g.dim(), "analytic_score x");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -(x[i] - g.mean[i]) / g.var[i];
  return out;
}

double gaussian_log_density(const GaussianFamily& g, std::span<const double> x) {
  require_dim(x.size(), g.dim(), "gaussian_log_density x");
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - g.mean[i];
    lp += -0.5 * (std::log(2.0 * std::numbers::pi * g.var[i]) + d * d / g.var[i]);
  }
  return lp;
}

double gaussian_kl(const GaussianFamily& p, const GaussianFamily& q) {
  require_dim(q.dim(), p.dim(), "gaussian_kl dimensions");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = p.mean[i] - q.mean[i];
    const double r = p.var[i] / q.var[i];
    // log(qv/pv) + pv/qv - 1 = r - 1 - log r, evaluated stably near r = 1.
    kl += 0.5 * ((r - 1.0) - std::log1p(r - 1.0) + d * d / q.var[i]);
  }
  return std::max(kl, 0.0);
}

void gauss_legendre(std::size_t n, Vec& nodes, Vec& weights) {
  if (n == 0) throw DomainError("Gauss-Legendre order must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 1; i <= m; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) - 0.25) /
                        (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = ((2.0 * jd - 1.0) * z * p2 - (jd - 1.0) * p3) / jd;
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    nodes[i - 1] = -z;
    nodes[n - i] = z;
    weights[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
    weights[n - i] = weights[i - 1];
  }
}

QuadratureGrid QuadratureGrid::log_composite(double t_lo, double t_hi, std::size_t panels,
                                             std::size_t order, std::span<const double> breakpoints) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw DomainError("quadrature needs 0 < t_lo < t_hi");
  if (panels == 0) throw DomainError("quadrature needs at least one panel");
  Vec edges{std::log(t_lo)};
  for (double b : breakpoints) {
    if (b > t_lo && b < t_hi) edges.push_back(std::log(b));
  }
  edges.push_back(std::log(t_hi));
  std::sort(edges.begin(), edges.end());

  Vec gl_x;
  Vec gl_w;
  gauss_legendre(order, gl_x, gl_w);
  const double total = edges.back() - edges.front();
  QuadratureGrid grid;
  grid.t_lo = t_lo;
  grid.t_hi = t_hi;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s];
    const double b = edges[s + 1];
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(panels) * (b - a) / total)));
    const double h = (b - a) / static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
      const double mid = a + (static_cast<double>(p) + 0.5) * h;
      for (std::size_t k = 0; k < order; ++k) {
        const double u = mid + 0.5 * h * gl_x[k];
        const double t = std::exp(u);
        grid.nodes.push_back(t);
        grid.weights.push_back(0.5 * h * gl_w[k] * t);  // dt = t du
      }
    }
  }
  return grid;
}

QuadratureGrid default_grid(const DiffusionSchedule& sched) {
  const double split[] = {1.0};
  return QuadratureGrid::log_composite(sched.t_min, sched.T, 48, 16, split);
}

double ikl_quadrature(const GaussianFamily& p0, const GaussianFamily& q0,
                      const DiffusionSchedule& sched, const WeightingFn& w,
                      const QuadratureGrid& grid) {
  require_dim(q0.dim(), p0.dim(), "ikl_quadrature dimensions");
  double total = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    const double t = grid.nodes[k];
    total += grid.weights[k] * weighting(w, sched, t) *
             gaussian_kl(diffused_gaussian(p0, sched, t), diffused_gaussian(q0, sched, t));
  }
  return total;
}

McEstimate ikl_monte_carlo(const GaussianFamily& p0, const GaussianFamily& q0,
                           const DiffusionSchedule& sched, const WeightingFn& w,
                           TimeSampler sampler, std::size_t samples, Rng& rng) {
  if (samples < 2) throw DomainError("ikl_monte_carlo needs at least two samples");
  double sum = 0.0;
  double sum_sq = 0.0;
  Vec x(p0.dim());
  for (std::size_t n = 0; n < samples; ++n) {
    const TimeDraw td = draw_time(sched, sampler, rng);
    const GaussianFamily pt = diffused_gaussian(p0, sched, td.t);
    const GaussianFamily qt = diffused_gaussian(q0, sched, td.t);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = pt.mean[i] + std::sqrt(pt.var[i]) * rng.normal();
    const double v = td.inv_density * weighting(w, sched, td.t) *
                     (gaussian_log_density(pt, x) - gaussian_log_density(qt, x));
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

double ikl_grad_oracle(double theta, const AffineGaussianCase& c, const DiffusionSchedule& sched,
                       const WeightingFn& w, const QuadratureGrid& grid) {
  double total = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    const double t = grid.nodes[k];
    const auto [a, s] = alpha_sigma(sched, t);
    total += grid.weights[k] * weighting(w, sched, t) * a * a * (theta - c.q_mean) /
             (a * a * c.q_var + s * s);
  }
  return total;
}

double affine_ikl(double theta, const AffineGaussianCase& c, const DiffusionSchedule& sched,
                  const WeightingFn& w, const QuadratureGrid& grid) {
  const GaussianFamily p0{{theta}, {c.p_var}};
  const GaussianFamily q0{{c.q_mean}, {c.q_var}};
  double total = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    const double t = grid.nodes[k];
    total += grid.weights[k] * weighting(w, sched, t) *
             gaussian_kl(diffused_gaussian(p0, sched, t), diffused_gaussian(q0, sched, t));
  }
  return total;
}

double misaligned_weight_integral(const WeightingFn& w) {
  // ramp: int_0^1 t/(2t) dt + int_1^inf 1/(2t^2) dt = 1/2 + 1/2
  if (w.kind == WeightingKind::ramp) return w.scale;
  throw DomainError("int_0^inf w(t)/(2t) dt diverges for the '" + std::string(to_string(w.kind)) +
                    "' weighting; use ramp");
}

double misaligned_ikl(double theta, const WeightingFn& w) {
  return theta * theta * misaligned_weight_integral(w);
}

QuadratureGrid misaligned_grid() {
  const double split[] = {1.0};
  return QuadratureGrid::log_composite(kMisalignedTLo, kMisalignedTHi, 96, 16, split);
}

double misaligned_ikl_quadrature(double theta, const WeightingFn& w, const QuadratureGrid& grid) {
  misaligned_weight_integral(w);
  if (grid.t_hi <= 1.0) throw DomainError("misaligned quadrature grid must extend past t = 1");
  const DiffusionSchedule sched = DiffusionSchedule::ve(grid.t_lo, grid.t_hi);
  // First coordinate only: the uniform coordinate is shared and cancels in the ratio.
  const GaussianFamily p0{{theta}, {0.0}};
  const GaussianFamily q0{{0.0}, {0.0}};
  double total = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    const double t = grid.nodes[k];
    total += grid.weights[k] * weighting(w, sched, t) *
             gaussian_kl(diffused_gaussian(p0, sched, t), diffused_gaussian(q0, sched, t));
  }
  const double head = w.scale * theta * theta * std::min(grid.t_lo, 1.0) / 2.0;
  const double tail = w.scale * theta * theta / (2.0 * grid.t_hi);
  return total + head + tail;
}

DivergenceComparison misaligned_divergences(double theta, const WeightingFn& w) {
  const bool apart = theta != 0.0;
  return {misaligned_ikl(theta, w), apart ? kInfiniteDivergence : 0.0,
          apart ? std::numbers::ln2 : 0.0, std::abs(theta)};
}

DiffusedGaussianScore::DiffusedGaussianScore(GaussianFamily p0, DiffusionSchedule sched)
    : p0_(std::move(p0)), sched_(sched) {
  p0_.validate();
  sched_.validate();
}

void DiffusedGaussianScore::score_batch(std::span<const double> xs, std::span<const double> ts,
                                        std::span<double> out) const {
  const std::size_t d = p0_.dim();
  require_dim(xs.size(), ts.size() * d, "DiffusedGaussianScore xs");
  require_dim(out.size(), xs.size(), "DiffusedGaussianScore out");
  for (std::size_t r = 0; r < ts.size(); ++r) {
    const auto [a, s] = alpha_sigma_any(sched_, ts[r]);
    for (std::size_t i = 0; i < d; ++i) {
      const double var = a * a * p0_.var[i] + s * s;
      out[r * d + i] = -(xs[r * d + i] - a * p0_.mean[i]) / var;
    }
  }
}

void GaussianMixture::validate() const {
  if (means.empty()) throw DimensionError("GaussianMixture needs at least one component");
  require_dim(weights.size(), means.size(), "GaussianMixture weights");
  for (const auto& m : means) require_dim(m.size(), dim(), "GaussianMixture mean");
  if (!(var > 0.0)) throw DomainError("GaussianMixture variance must be positive");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("GaussianMixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("GaussianMixture weights must sum to 1");
}

GaussianMixture ring_mixture(std::size_t components, double radius, double std_dev) {
  GaussianMixture mix;
  for (std::size_t k = 0; k < components; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(components);
    mix.means.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  mix.weights.assign(components, 1.0 / static_cast<double>(components));
  mix.var = std_dev * std_dev;
  mix.validate();
  return mix;
}

DiffusedMixtureScore::DiffusedMixtureScore(GaussianMixture mix, DiffusionSchedule sched)
    : mix_(std::move(mix)), sched_(sched) {
  mix_.validate();
  sched_.validate();
}

void DiffusedMixtureScore::score_batch(std::span<const double> xs, std::span<const double> ts,
                                       std::span<double> out) const {
  const std::size_t d = mix_.dim();
  const std::size_t k_count = mix_.means.size();
  require_dim(xs.size(), ts.size() * d, "DiffusedMixtureScore xs");
  require_dim(out.size(), xs.size(), "DiffusedMixtureScore out");
  Vec logit(k_count);
  for (std::size_t r = 0; r < ts.size(); ++r) {
    const auto [a, s] = alpha_sigma_any(sched_, ts[r]);
    const double var = a * a * mix_.var + s * s;
    const double* x = xs.data() + r * d;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
      double sq = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = x[i] - a * mix_.means[k][i];
        sq += diff * diff;
      }
      logit[k] = std::log(mix_.weights[k]) - 0.5 * sq / var;
      top = std::max(top, logit[k]);
    }
    double norm = 0.0;
    for (double& l : logit) {
      l = std::exp(l - top);
      norm += l;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) acc += logit[k] * (a * mix_.means[k][i] - x[i]);
      out[r * d + i] = acc / (norm * var);
    }
  }
}

}  // namespace ikl
