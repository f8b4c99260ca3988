#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ikl/analytic.hpp"

using namespace ikl;

namespace {

double kl_1d(double m1, double v1, double m2, double v2) {
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

const WeightingFn kUnit{WeightingKind::constant, 1.0};
const WeightingFn kRamp{WeightingKind::ramp, 1.0};

}  // namespace

TEST(GaussLegendre, ThreePointRule) {
  Vec x;
  Vec w;
  gauss_legendre(3, x, w);
  ASSERT_EQ(x.size(), 3u);
  const double r = std::sqrt(0.6);
  EXPECT_NEAR(x[0] * x[0], r * r, 1e-15);
  EXPECT_NEAR(x[1], 0.0, 1e-15);
  EXPECT_NEAR(w[1], 8.0 / 9.0, 1e-14);
  EXPECT_NEAR(w[0], 5.0 / 9.0, 1e-14);
}

TEST(GaussLegendre, ExactForDegree2nMinus1) {
  for (std::size_t n : {2u, 5u, 16u}) {
    Vec x;
    Vec w;
    gauss_legendre(n, x, w);
    const int deg = static_cast<int>(2 * n - 1);
    for (int k = 0; k <= deg; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * std::pow(x[i], k);
      const double want = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
      EXPECT_NEAR(s, want, 1e-13) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Quadrature, LogGridIntegratesInverseT) {
  const auto grid = QuadratureGrid::log_composite(1e-3, 10.0, 8, 8);
  double s = 0.0;
  double s1 = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    s += grid.weights[i] / grid.nodes[i];
    s1 += grid.weights[i];
  }
  EXPECT_NEAR(s, std::log(1e4), 1e-12);
  EXPECT_NEAR(s1, 10.0 - 1e-3, 1e-10);
}

TEST(Quadrature, BreakpointsLandOnPanelEdges) {
  const Vec bp{1.0};
  const auto grid = QuadratureGrid::log_composite(1e-3, 10.0, 12, 8, bp);
  // Integrate the ramp kink exactly: int min(t, 1/t) = (1 - 1e-6) / 2 + log 10.
  double s = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i)
    s += grid.weights[i] * weighting(kRamp, DiffusionSchedule::ve(1e-3, 10.0), grid.nodes[i]);
  EXPECT_NEAR(s, 0.5 * (1.0 - 1e-6) + std::log(10.0), 1e-12);
}

TEST(Gaussian, KlMatchesClosedForm) {
  const GaussianFamily p{{0.3, -1.0}, {0.5, 2.0}};
  const GaussianFamily q{{1.0, 0.0}, {1.5, 1.0}};
  EXPECT_NEAR(gaussian_kl(p, q), kl_1d(0.3, 0.5, 1.0, 1.5) + kl_1d(-1.0, 2.0, 0.0, 1.0), 1e-14);
  EXPECT_EQ(gaussian_kl(p, p), 0.0);
}

TEST(Gaussian, DiffusedMarginal) {
  const GaussianFamily p{{2.0}, {0.5}};
  const auto vp = DiffusionSchedule::vp();
  const auto [a, s] = alpha_sigma(vp, 0.3);
  const GaussianFamily pt = diffused_gaussian(p, vp, 0.3);
  EXPECT_NEAR(pt.mean[0], 2.0 * a, 1e-15);
  EXPECT_NEAR(pt.var[0], a * a * 0.5 + s * s, 1e-15);
  // Point masses are valid starting laws.
  const GaussianFamily pm = diffused_gaussian(GaussianFamily{{1.0}, {0.0}}, DiffusionSchedule::ve(), 2.0);
  EXPECT_DOUBLE_EQ(pm.var[0], 2.0);
}

TEST(Gaussian, ScoreIsGradientOfLogDensity) {
  const GaussianFamily g{{0.5, -0.2, 1.0}, {0.3, 2.0, 1.0}};
  const Vec x{1.1, 0.4, -0.7};
  const Vec sc = analytic_score(g, x);
  const auto f = [&](std::span<const double> y) { return gaussian_log_density(g, y); };
  const Vec fd = finite_diff_grad(f, x, 1e-6);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(sc[i], fd[i], 1e-7);
}

TEST(Gaussian, LogDensityAtMean) {
  const GaussianFamily g{{0.0}, {1.0}};
  EXPECT_NEAR(gaussian_log_density(g, Vec{0.0}), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(Ikl, EqualVarianceVeHasLogClosedForm) {
  // KL(N(m, v + t) || N(0, v + t)) = m^2 / (2 (v + t)); integrate with unit weight.
  const auto sched = DiffusionSchedule::ve(1e-3, 10.0);
  const GaussianFamily p{{1.5}, {0.2}};
  const GaussianFamily q{{0.0}, {0.2}};
  const double want = 1.5 * 1.5 / 2.0 * std::log((0.2 + 10.0) / (0.2 + 1e-3));
  EXPECT_NEAR(ikl_quadrature(p, q, sched, kUnit, default_grid(sched)), want, 1e-10 * want);
}

TEST(Ikl, QuadratureAgreesWithMonteCarlo) {
  const auto sched = DiffusionSchedule::vp();
  const GaussianFamily p{{0.5, -0.5}, {0.4, 1.2}};
  const GaussianFamily q{{0.0, 0.0}, {1.0, 1.0}};
  const double exact = ikl_quadrature(p, q, sched, kRamp, default_grid(sched));
  Rng rng(31);
  const McEstimate mc = ikl_monte_carlo(p, q, sched, kRamp, TimeSampler::uniform, 200000, rng);
  EXPECT_NEAR(mc.mean, exact, 4.0 * mc.std_error);
  EXPECT_GT(mc.std_error, 0.0);
}

TEST(Ikl, NonNegativeAndZeroOnlyOnEqualLaws) {
  Rng rng(32);
  const auto sched = DiffusionSchedule::ve(1e-3, 5.0);
  const auto grid = default_grid(sched);
  for (int i = 0; i < 200; ++i) {
    const GaussianFamily p{{rng.normal()}, {0.1 + rng.uniform()}};
    const GaussianFamily q{{rng.normal()}, {0.1 + rng.uniform()}};
    EXPECT_GT(ikl_quadrature(p, q, sched, kRamp, grid), 0.0);
    EXPECT_LE(std::abs(ikl_quadrature(p, p, sched, kRamp, grid)), 1e-10);
  }
}

TEST(Ikl, GradientOracleMatchesFiniteDifferences) {
  const AffineGaussianCase c{0.7, 0.4, 1.3};
  for (const auto& sched : {DiffusionSchedule::ve(1e-3, 10.0), DiffusionSchedule::vp()}) {
    const auto grid = default_grid(sched);
    for (double theta : {-1.0, 0.0, 0.9, 2.5}) {
      const auto f = [&](std::span<const double> p) { return affine_ikl(p[0], c, sched, kRamp, grid); };
      const Vec fd = finite_diff_grad(f, Vec{theta}, 1e-5);
      EXPECT_NEAR(ikl_grad_oracle(theta, c, sched, kRamp, grid), fd[0], 1e-7);
    }
  }
}

TEST(Ikl, AffineUnitWindowClosedForm) {
  // p_var = q_var = 1 on VE [1e-3, 1]: the gradient is theta * log(2 / 1.001).
  const auto sched = DiffusionSchedule::ve(1e-3, 1.0);
  const AffineGaussianCase c{1.0, 0.0, 1.0};
  const double g = ikl_grad_oracle(1.0, c, sched, kUnit, default_grid(sched));
  EXPECT_NEAR(g, std::log(2.0 / 1.001), 1e-12);
  EXPECT_NEAR(g, 0.69215, 1e-5);
  EXPECT_NEAR(affine_ikl(1.0, c, sched, kUnit, default_grid(sched)), 0.5 * std::log(2.0 / 1.001), 1e-12);
}

TEST(Misaligned, QuadraticInTheta) {
  // Ramp weighting: int_0^1 t / (2t) dt + int_1^inf 1 / (2t^2) dt = 1.
  EXPECT_DOUBLE_EQ(misaligned_weight_integral(kRamp), 1.0);
  EXPECT_DOUBLE_EQ(misaligned_ikl(2.0, kRamp), 4.0);
  EXPECT_DOUBLE_EQ(misaligned_ikl(-0.5, {WeightingKind::ramp, 3.0}), 0.75);
  EXPECT_EQ(misaligned_ikl(0.0, kRamp), 0.0);
}

TEST(Misaligned, UnboundedWeightingsRejected) {
  EXPECT_THROW(misaligned_weight_integral(kUnit), DomainError);
  EXPECT_THROW(misaligned_weight_integral({WeightingKind::sigma_squared, 1.0}), DomainError);
}

TEST(Misaligned, QuadratureMatchesClosedForm) {
  const auto grid = misaligned_grid();
  EXPECT_DOUBLE_EQ(grid.t_lo, kMisalignedTLo);
  for (double theta : {0.1, 1.0, 2.0, -3.0}) {
    const double want = misaligned_ikl(theta, kRamp);
    EXPECT_NEAR(misaligned_ikl_quadrature(theta, kRamp, grid), want, 1e-3 * want);
  }
}

TEST(Misaligned, DivergenceTable) {
  const DivergenceComparison d = misaligned_divergences(2.0, kRamp);
  EXPECT_DOUBLE_EQ(d.ikl, 4.0);
  EXPECT_EQ(d.kl, kInfiniteDivergence);
  EXPECT_DOUBLE_EQ(d.js, std::log(2.0));
  EXPECT_DOUBLE_EQ(d.wasserstein_reference, 2.0);
  const DivergenceComparison same = misaligned_divergences(0.0, kRamp);
  EXPECT_EQ(same.kl, 0.0);
  EXPECT_EQ(same.js, 0.0);
}

TEST(Mixture, InvalidWeightsRejected) {
  GaussianMixture m{{Vec{0.0}, Vec{1.0}}, Vec{0.5, 0.4}, 1.0};
  EXPECT_ANY_THROW(m.validate());
  m.weights = {0.5};
  EXPECT_ANY_THROW(m.validate());
}
