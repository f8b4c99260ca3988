#pragma once

// Closed-form ground truth: diagonal Gaussians under linear diffusion, their
// KL and integral-KL divergences, and the disjoint-support example where the
// plain KL degenerates but the integral KL stays a smooth quadratic.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ikl/common.hpp"
#include "ikl/diffusion.hpp"
#include "ikl/nets.hpp"
#include "ikl/rng.hpp"

namespace ikl {

struct GaussianFamily {
  Vec mean;
  Vec var;

  static GaussianFamily isotropic(std::size_t dim, double mean, double var);
  std::size_t dim() const { return mean.size(); }
  void validate() const;
};

/// Marginal at time t of the diffusion started from g: N(alpha m, alpha^2 v + sigma^2).
/// Accepts var == 0 (a point mass) as the starting law.
GaussianFamily diffused_gaussian(const GaussianFamily& g, const DiffusionSchedule& sched, double t);

Vec analytic_score(const GaussianFamily& g, std::span<const double> x);
double gaussian_log_density(const GaussianFamily& g, std::span<const double> x);
double gaussian_kl(const GaussianFamily& p, const GaussianFamily& q);

/// Nodes and weights for int f(t) dt; composite Gauss-Legendre in u = log t.
struct QuadratureGrid {
  Vec nodes;
  Vec weights;
  double t_lo = 0.0;
  double t_hi = 0.0;

  /// `panels` equal panels on [log t_lo, log t_hi], each `order` points.
  /// Breakpoints inside (t_lo, t_hi) split the axis first so that kinks in the
  /// integrand fall on panel edges; panels are spread in proportion to length.
  static QuadratureGrid log_composite(double t_lo, double t_hi, std::size_t panels,
                                     std::size_t order, std::span<const double> breakpoints = {});
};

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the Legendre recurrence).
void gauss_legendre(std::size_t n, Vec& nodes, Vec& weights);

/// 48 panels x 16 points over the schedule window, split at t = 1.
QuadratureGrid default_grid(const DiffusionSchedule& sched);

/// int w(t) KL(p_t || q_t) dt over the grid.
double ikl_quadrature(const GaussianFamily& p0, const GaussianFamily& q0,
                      const DiffusionSchedule& sched, const WeightingFn& w,
                      const QuadratureGrid& grid);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo IKL: sample t on the window, x ~ p_t, average w(t) log(p_t/q_t)(x) / p(t).
McEstimate ikl_monte_carlo(const GaussianFamily& p0, const GaussianFamily& q0,
                           const DiffusionSchedule& sched, const WeightingFn& w,
                           TimeSampler sampler, std::size_t samples, Rng& rng);

/// p0 = N(theta, p_var) against q0 = N(q_mean, q_var), one dimension.
struct AffineGaussianCase {
  double p_var = 1.0;
  double q_mean = 0.0;
  double q_var = 1.0;
};

/// d/dtheta int w(t) KL(p_t || q_t) dt = int w alpha^2 (theta - q_mean) / (alpha^2 q_var + sigma^2) dt.
double ikl_grad_oracle(double theta, const AffineGaussianCase& c, const DiffusionSchedule& sched,
                       const WeightingFn& w, const QuadratureGrid& grid);

/// Closed-form IKL along the affine family, for finite-difference checks.
double affine_ikl(double theta, const AffineGaussianCase& c, const DiffusionSchedule& sched,
                  const WeightingFn& w, const QuadratureGrid& grid);

// Disjoint-support example: P_theta = law of (theta, U[0,1]) against P_0 under dx = dw.

/// int_0^inf w(t) / (2t) dt. Only the ramp weighting makes it finite; other
/// kinds throw DomainError.
double misaligned_weight_integral(const WeightingFn& w);

/// theta^2 * int_0^inf w(t) / (2t) dt.
double misaligned_ikl(double theta, const WeightingFn& w);

/// Truncated window [1e-9, 1e3] used by the quadrature cross-check.
constexpr double kMisalignedTLo = 1e-9;
constexpr double kMisalignedTHi = 1e3;
QuadratureGrid misaligned_grid();

/// Integrates KL(N(theta, t) || N(0, t)) built from diffused point masses over
/// the grid and adds the analytic head (t < t_lo) and tail (t > t_hi) pieces of
/// the ramp weighting.
double misaligned_ikl_quadrature(double theta, const WeightingFn& w, const QuadratureGrid& grid);

constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

struct DivergenceComparison {
  double ikl;
  double kl;   // kInfiniteDivergence for theta != 0
  double js;   // log 2 for theta != 0
  double wasserstein_reference;  // |theta|, quoted rather than computed
};

DivergenceComparison misaligned_divergences(double theta, const WeightingFn& w);

/// Scores of a Gaussian diffused along a schedule (exact teacher / student scores).
class DiffusedGaussianScore final : public ScoreModel {
 public:
  DiffusedGaussianScore(GaussianFamily p0, DiffusionSchedule sched);
  std::size_t data_dim() const override { return p0_.dim(); }
  void score_batch(std::span<const double> xs, std::span<const double> ts,
                   std::span<double> out) const override;

 private:
  GaussianFamily p0_;
  DiffusionSchedule sched_;
};

/// Equal-variance isotropic Gaussian mixture.
struct GaussianMixture {
  std::vector<Vec> means;
  Vec weights;
  double var = 1.0;

  std::size_t dim() const { return means.front().size(); }
  void validate() const;
};

/// `components` equally weighted modes on a circle of `radius` in the plane.
GaussianMixture ring_mixture(std::size_t components, double radius, double std_dev);

class DiffusedMixtureScore final : public ScoreModel {
 public:
  DiffusedMixtureScore(GaussianMixture mix, DiffusionSchedule sched);
  std::size_t data_dim() const override { return mix_.dim(); }
  void score_batch(std::span<const double> xs, std::span<const double> ts,
                   std::span<double> out) const override;

 private:
  GaussianMixture mix_;
  DiffusionSchedule sched_;
};

}  // namespace ikl
