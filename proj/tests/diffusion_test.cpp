#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ikl/diffusion.hpp"
#include "ikl/rng.hpp"

using namespace ikl;

TEST(Rng, MatchesReferenceXoshiroOutputs) {
  // Frozen from an independent splitmix64 + xoshiro256** implementation.
  Rng zero(0);
  EXPECT_EQ(zero.next(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(zero.next(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(zero.next(), 0x1a5f849d4933e6e0ULL);

  Rng a(42);
  EXPECT_EQ(a.next(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(a.next(), 0x6104d9866d113a7eULL);

  Rng b(42, 1);
  EXPECT_EQ(b.next(), 0xbe15272cdf80b6c2ULL);
  EXPECT_EQ(b.next(), 0xaf6e2ee49ff5d0e3ULL);
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng r(42);
  EXPECT_DOUBLE_EQ(r.uniform(), 0.08386297105988216);
  EXPECT_DOUBLE_EQ(r.uniform(), 0.3789802506626686);
}

TEST(Rng, BoxMullerPairOrder) {
  const double u1 = 1.0 - 0.08386297105988216;
  const double u2 = 0.3789802506626686;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  Rng r(42);
  EXPECT_NEAR(r.normal(), rad * std::cos(2.0 * std::numbers::pi * u2), 1e-15);
  EXPECT_NEAR(r.normal(), rad * std::sin(2.0 * std::numbers::pi * u2), 1e-15);
}

TEST(Rng, StreamsDiffer) {
  Rng a(7, Rng::kDataStream);
  Rng b(7, Rng::kTrainStream);
  EXPECT_NE(a.next(), b.next());
}

TEST(Rng, NormalMomentsAreStandard) {
  Rng r(123);
  const int n = 200000;
  double s = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Schedule, VeCoefficients) {
  const auto s = DiffusionSchedule::ve(1e-3, 10.0);
  for (double t : {1e-3, 0.5, 2.0, 10.0}) {
    const auto [a, sig] = alpha_sigma(s, t);
    EXPECT_EQ(a, 1.0);
    EXPECT_DOUBLE_EQ(sig * sig, t);
  }
  EXPECT_DOUBLE_EQ(s.sigma_max(), std::sqrt(10.0));
}

TEST(Schedule, VpCoefficientsMatchIntegratedBeta) {
  const auto s = DiffusionSchedule::vp(0.1, 20.0, 1e-3, 1.0);
  for (double t : {1e-3, 0.1, 0.5, 1.0}) {
    const double integral = 0.1 * t + 0.5 * (20.0 - 0.1) * t * t;
    const auto [a, sig] = alpha_sigma(s, t);
    EXPECT_NEAR(a, std::exp(-0.5 * integral), 1e-14);
    EXPECT_NEAR(a * a + sig * sig, 1.0, 1e-14);
  }
}

TEST(Schedule, VpSigmaIsMonotone) {
  const auto s = DiffusionSchedule::vp();
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double t = s.t_min + (s.T - s.t_min) * i / 100.0;
    const auto [a, sig] = alpha_sigma(s, t);
    EXPECT_GT(sig, prev);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
    prev = sig;
  }
}

TEST(Schedule, OutsideWindowThrows) {
  const auto s = DiffusionSchedule::ve(1e-3, 1.0);
  EXPECT_THROW(alpha_sigma(s, 5e-4), DomainError);
  EXPECT_THROW(alpha_sigma(s, 1.5), DomainError);
  EXPECT_THROW(alpha_sigma_any(s, 0.0), DomainError);
  EXPECT_NO_THROW(alpha_sigma_any(s, 1.5));
}

TEST(Schedule, InvalidParametersRejected) {
  EXPECT_ANY_THROW(DiffusionSchedule::ve(0.0, 1.0).validate());
  EXPECT_ANY_THROW(DiffusionSchedule::ve(2.0, 1.0).validate());
  EXPECT_ANY_THROW(DiffusionSchedule::vp(-1.0, 20.0).validate());
}

TEST(Schedule, KindNamesRoundTrip) {
  for (auto k : {ScheduleKind::ve, ScheduleKind::vp})
    EXPECT_EQ(schedule_kind_from_string(to_string(k)), k);
  EXPECT_THROW(schedule_kind_from_string("sub-vp"), ConfigError);
}

TEST(Transition, AffineInNoise) {
  const auto s = DiffusionSchedule::vp();
  const Vec x0{1.0, -2.0};
  const Vec eps{0.5, 0.25};
  const auto [a, sig] = alpha_sigma(s, 0.3);
  const Vec xt = sample_transition(s, x0, 0.3, eps);
  EXPECT_DOUBLE_EQ(xt[0], a * 1.0 + sig * 0.5);
  EXPECT_DOUBLE_EQ(xt[1], a * -2.0 + sig * 0.25);
  EXPECT_THROW(sample_transition(s, x0, 0.3, Vec{1.0}), DimensionError);
}

TEST(Transition, ConditionalScoreIsMinusEpsOverSigma) {
  const auto s = DiffusionSchedule::ve(1e-3, 10.0);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const double t = 1e-3 + rng.uniform() * 9.0;
    const Vec x0{rng.normal(), rng.normal()};
    const Vec eps{rng.normal(), rng.normal()};
    const Vec xt = sample_transition(s, x0, t, eps);
    const Vec sc = conditional_score(s, x0, xt, t);
    const double sig = std::sqrt(t);
    EXPECT_NEAR(sc[0], -eps[0] / sig, 1e-9 * (1.0 + std::abs(eps[0] / sig)));
    EXPECT_NEAR(sc[1], -eps[1] / sig, 1e-9 * (1.0 + std::abs(eps[1] / sig)));
  }
}

TEST(Tweedie, RecoversCleanPointWithConditionalScore) {
  const auto s = DiffusionSchedule::vp();
  const Vec x0{0.7, -1.3};
  const Vec xt = sample_transition(s, x0, 0.4, Vec{0.3, 1.1});
  const Vec back = tweedie_denoise(s, xt, 0.4, conditional_score(s, x0, xt, 0.4));
  EXPECT_NEAR(back[0], x0[0], 1e-12);
  EXPECT_NEAR(back[1], x0[1], 1e-12);
}

TEST(Weighting, Kinds) {
  const auto s = DiffusionSchedule::ve(1e-3, 10.0);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::ramp, 1.0}, s, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::ramp, 1.0}, s, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::ramp, 1.0}, s, 4.0), 0.25);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::constant, 3.0}, s, 7.0), 3.0);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::sigma_squared, 2.0}, s, 0.25), 0.5);
  EXPECT_DOUBLE_EQ(weighting({WeightingKind::inverse_sigma_squared, 1.0}, s, 0.25), 4.0);
  EXPECT_THROW(weighting({WeightingKind::constant, 1.0}, s, 0.0), DomainError);
}

TEST(Weighting, NamesRoundTrip) {
  for (auto k : {WeightingKind::ramp, WeightingKind::constant, WeightingKind::sigma_squared,
                 WeightingKind::inverse_sigma_squared})
    EXPECT_EQ(weighting_kind_from_string(to_string(k)), k);
  EXPECT_THROW(weighting_kind_from_string("cosine"), ConfigError);
}

TEST(TimeDraw, StaysInsideWindow) {
  const auto s = DiffusionSchedule::ve(1e-3, 10.0);
  Rng rng(9);
  for (auto sampler : {TimeSampler::uniform, TimeSampler::log_uniform}) {
    for (int i = 0; i < 10000; ++i) {
      const TimeDraw d = draw_time(s, sampler, rng);
      EXPECT_TRUE(s.contains(d.t));
      EXPECT_GT(d.inv_density, 0.0);
    }
  }
}

TEST(TimeDraw, ImportanceWeightsIntegrateExactly) {
  // mean(f(t) / p(t)) estimates int f. For f = 1 the uniform sampler is exact
  // and the log-uniform estimate of the window length converges.
  const auto s = DiffusionSchedule::ve(1e-3, 10.0);
  Rng rng(10);
  const int n = 400000;
  double acc_u = 0.0;
  double acc_l = 0.0;
  double acc_l_inv = 0.0;
  for (int i = 0; i < n; ++i) {
    acc_u += draw_time(s, TimeSampler::uniform, rng).inv_density;
    const TimeDraw d = draw_time(s, TimeSampler::log_uniform, rng);
    acc_l += d.inv_density;
    acc_l_inv += d.inv_density / d.t;
  }
  EXPECT_NEAR(acc_u / n, s.window(), 1e-9);
  EXPECT_NEAR(acc_l / n, s.window(), 0.02 * s.window());
  // For f = 1/t the log-uniform weights are constant: every term is log(T / t_min).
  EXPECT_NEAR(acc_l_inv / n, std::log(s.T / s.t_min), 1e-9);
}

TEST(TimeDraw, SamplerNamesRoundTrip) {
  for (auto k : {TimeSampler::uniform, TimeSampler::log_uniform})
    EXPECT_EQ(time_sampler_from_string(to_string(k)), k);
  EXPECT_THROW(time_sampler_from_string("sobol"), ConfigError);
}
