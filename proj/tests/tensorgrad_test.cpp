#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ikl/analytic.hpp"
#include "ikl/rng.hpp"
#include "ikl/tensorgrad.hpp"

using namespace ikl;

namespace {

double softplus_ref(double x) { return std::log(1.0 + std::exp(x)); }

// Straightforward per-layer matrix-vector product, kept independent of the
// library's batched kernels.
Vec reference_forward(const MlpNet& net, const Vec& input) {
  Vec x = input;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const std::size_t in = net.layer_sizes[l];
    const std::size_t out = net.layer_sizes[l + 1];
    Vec y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = net.params[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += net.params[off + o * in + i] * x[i];
      const bool hidden = l + 2 < net.layer_sizes.size();
      y[o] = !hidden ? s : (net.activation == Activation::softplus ? softplus_ref(s) : std::tanh(s));
    }
    off += in * out + out;
    x = y;
  }
  return x;
}

double max_rel_err(const Vec& a, const Vec& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-3});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const MlpNet net = zero_mlp({3, 5, 2}, Activation::softplus);
  const Vec y = forward(net, Vec{1.0, -2.0, 0.5});
  // Hidden softplus(0) = log 2, but zero output weights and biases kill it.
  EXPECT_EQ(y, (Vec{0.0, 0.0}));
}

TEST(Mlp, SingleAffineLayer) {
  MlpNet net = zero_mlp({1, 1}, Activation::softplus);
  net.params = {2.0, 1.0};
  EXPECT_EQ(forward(net, Vec{3.0}), Vec{7.0});
}

TEST(Mlp, ForwardMatchesExplicitLoops) {
  for (Activation act : {Activation::softplus, Activation::tanh}) {
    Rng rng(11);
    const MlpNet net = init_mlp({3, 7, 5, 2}, act, rng);
    const Vec x{0.3, -1.1, 2.0};
    const Vec want = reference_forward(net, x);
    const Vec got = forward(net, x);
    ASSERT_EQ(got.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST(Mlp, BatchedForwardMatchesSingleRows) {
  Rng rng(5);
  const MlpNet net = init_mlp({2, 6, 6, 3}, Activation::softplus, rng);
  const std::size_t batch = 7;  // exercises the blocked path and the remainder
  Vec xs(batch * 2);
  for (double& v : xs) v = rng.normal();
  MlpWorkspace ws;
  const auto ys = ws.forward(net, xs, batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const Vec y = forward(net, std::span<const double>(xs).subspan(r * 2, 2));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ys[r * 3 + j], y[j]);
  }
}

TEST(Mlp, DimensionMismatchIsRejected) {
  const MlpNet net = zero_mlp({3, 2}, Activation::tanh);
  EXPECT_THROW(forward(net, Vec{1.0, 2.0}), DimensionError);
  EXPECT_THROW(backward(net, Vec{1.0, 2.0, 3.0}, Vec{1.0}), DimensionError);
  MlpNet bad = net;
  bad.params.pop_back();
  EXPECT_THROW(bad.validate(), DimensionError);
}

TEST(Mlp, ParamCountFormula) {
  const std::vector<std::size_t> sizes{3, 64, 64, 2};
  EXPECT_EQ(MlpNet::param_count(sizes), 3u * 64 + 64 + 64u * 64 + 64 + 64u * 2 + 2);
}

TEST(Mlp, NonFiniteParamsFailValidation) {
  MlpNet net = zero_mlp({1, 1}, Activation::softplus);
  net.params[0] = std::nan("");
  EXPECT_ANY_THROW(net.validate());
}

TEST(Backward, AffineDerivatives) {
  MlpNet net = zero_mlp({1, 1}, Activation::softplus);
  net.params = {2.0, 1.0};
  const MlpGradients g = backward(net, Vec{3.0}, Vec{1.0});
  EXPECT_EQ(g.params, (Vec{3.0, 1.0}));
  EXPECT_EQ(g.input, Vec{2.0});
}

TEST(Backward, ZeroOutputGradGivesZeroGradients) {
  Rng rng(3);
  const MlpNet net = init_mlp({2, 4, 3}, Activation::tanh, rng);
  const MlpGradients g = backward(net, Vec{0.4, -0.2}, Vec{0.0, 0.0, 0.0});
  for (double v : g.params) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferencesOverShapeMatrix) {
  const std::vector<std::vector<std::size_t>> shapes{
      {1, 1}, {2, 3, 1}, {3, 8, 8, 2}, {4, 5, 5, 5, 3}, {2, 16, 2}};
  std::uint64_t seed = 100;
  for (const auto& shape : shapes) {
    for (Activation act : {Activation::softplus, Activation::tanh}) {
      Rng rng(seed++);
      MlpNet net = init_mlp(shape, act, rng);
      for (double& p : net.params) p += 0.1 * rng.normal();  // nonzero biases too
      Vec x(shape.front());
      for (double& v : x) v = rng.normal();
      Vec gout(shape.back());
      for (double& v : gout) v = rng.normal();
      const auto loss = [&](std::span<const double> p) {
        MlpNet n = net;
        n.params.assign(p.begin(), p.end());
        const Vec y = forward(n, x);
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) s += gout[j] * y[j];
        return s;
      };
      const MlpGradients g = backward(net, x, gout);
      const Vec fd = finite_diff_grad(loss, net.params, 1e-5);
      EXPECT_LE(max_rel_err(g.params, fd), 1e-4) << shape_string(shape) << " " << to_string(act);

      const auto loss_x = [&](std::span<const double> xv) {
        const Vec y = forward(net, xv);
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) s += gout[j] * y[j];
        return s;
      };
      const Vec fdx = finite_diff_grad(loss_x, x, 1e-5);
      EXPECT_LE(max_rel_err(g.input, fdx), 1e-4) << shape_string(shape);
    }
  }
}

TEST(Backward, LinearInOutputGrad) {
  Rng rng(8);
  const MlpNet net = init_mlp({3, 6, 2}, Activation::softplus, rng);
  const Vec x{0.2, 0.9, -0.4};
  for (int trial = 0; trial < 10; ++trial) {
    const Vec g1{rng.normal(), rng.normal()};
    const Vec g2{rng.normal(), rng.normal()};
    const double a = rng.normal();
    const double b = rng.normal();
    const Vec mix{a * g1[0] + b * g2[0], a * g1[1] + b * g2[1]};
    const MlpGradients r = backward(net, x, mix);
    const MlpGradients r1 = backward(net, x, g1);
    const MlpGradients r2 = backward(net, x, g2);
    for (std::size_t i = 0; i < r.params.size(); ++i)
      EXPECT_NEAR(r.params[i], a * r1.params[i] + b * r2.params[i], 1e-12);
  }
}

TEST(Backward, BatchedAccumulatesPerRowGradients) {
  Rng rng(21);
  const MlpNet net = init_mlp({2, 5, 1}, Activation::softplus, rng);
  const std::size_t batch = 9;
  Vec xs(batch * 2);
  Vec gs(batch);
  for (double& v : xs) v = rng.normal();
  for (double& v : gs) v = rng.normal();
  MlpWorkspace ws;
  ws.forward(net, xs, batch);
  Vec total(net.params.size(), 0.0);
  Vec input_grad(batch * 2);
  ws.backward(net, gs, total, input_grad);

  Vec want(net.params.size(), 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    const MlpGradients g =
        backward(net, std::span<const double>(xs).subspan(r * 2, 2), Vec{gs[r]});
    for (std::size_t i = 0; i < want.size(); ++i) want[i] += g.params[i];
    EXPECT_NEAR(input_grad[r * 2], g.input[0], 1e-14);
    EXPECT_NEAR(input_grad[r * 2 + 1], g.input[1], 1e-14);
  }
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(total[i], want[i], 1e-12);
}

TEST(Mlp, RepeatedCallsAreBitIdentical) {
  Rng rng(4);
  const MlpNet net = init_mlp({2, 8, 2}, Activation::tanh, rng);
  const Vec x{0.1, 0.2};
  EXPECT_EQ(forward(net, x), forward(net, x));
  EXPECT_EQ(backward(net, x, Vec{1.0, -1.0}).params, backward(net, x, Vec{1.0, -1.0}).params);
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  AdamState s = AdamState::init(2, 0.1, 0.9, 0.99);
  s.first_moment = {1.0, -2.0};
  s.second_moment = {4.0, 1.0};
  s.step_count = 3;
  const Vec p{0.5, 0.25};
  const AdamResult r = adam_step(s, p, Vec{0.0, 0.0});
  EXPECT_EQ(r.state.step_count, 4u);
  EXPECT_DOUBLE_EQ(r.state.first_moment[0], 0.9);
  EXPECT_DOUBLE_EQ(r.state.second_moment[1], 0.99);
  // Moments keep the previous direction, so params still move; with fresh
  // moments they would not.
  const AdamResult fresh = adam_step(AdamState::init(2, 0.1), p, Vec{0.0, 0.0});
  EXPECT_EQ(fresh.params, p);
}

TEST(Adam, FirstStepWithZeroBetasIsSignStep) {
  const AdamState s = AdamState::init(3, 0.01, 0.0, 0.0, 1e-8);
  const AdamResult r = adam_step(s, Vec{1.0, 1.0, 1.0}, Vec{3.0, -0.5, 1e-3});
  EXPECT_NEAR(r.params[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(r.params[1], 1.0 + 0.01, 1e-9);
  EXPECT_NEAR(r.params[2], 1.0 - 0.01, 1e-6);
}

TEST(Adam, ThreeStepTraceOnQuadratic) {
  // f(p) = (p - 3)^2, gradient 2 (p - 3). Trace computed by hand-rolling the
  // recurrence with long double.
  const double lr = 0.1;
  const double b0 = 0.9;
  const double b1 = 0.99;
  const double eps = 1e-8;
  long double p = 0.0L, m = 0.0L, v = 0.0L;
  Vec params{0.0};
  AdamState s = AdamState::init(1, lr, b0, b1, eps);
  for (int k = 1; k <= 3; ++k) {
    const long double g = 2.0L * (p - 3.0L);
    m = b0 * m + (1.0L - b0) * g;
    v = b1 * v + (1.0L - b1) * g * g;
    const long double mh = m / (1.0L - std::pow(static_cast<long double>(b0), k));
    const long double vh = v / (1.0L - std::pow(static_cast<long double>(b1), k));
    p -= lr * mh / (std::sqrt(vh) + eps);

    const Vec grad{2.0 * (params[0] - 3.0)};
    adam_step_inplace(s, params, grad);
    EXPECT_NEAR(params[0], static_cast<double>(p), 1e-12) << "step " << k;
  }
  EXPECT_EQ(s.step_count, 3u);
}

TEST(Adam, NonFiniteGradientAborts) {
  AdamState s = AdamState::init(1, 0.1);
  Vec p{1.0};
  EXPECT_THROW(adam_step_inplace(s, p, Vec{std::nan("")}), DivergenceError);
  EXPECT_THROW(adam_step_inplace(s, p, Vec{INFINITY}), DivergenceError);
}

TEST(Adam, MismatchedLengthsRejected) {
  AdamState s = AdamState::init(2, 0.1);
  Vec p{1.0};
  EXPECT_THROW(adam_step_inplace(s, p, Vec{1.0}), DimensionError);
}

TEST(FiniteDiff, Quadratic) {
  const auto f = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
  const Vec g = finite_diff_grad(f, Vec{1.0, 2.0}, 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FiniteDiff, ConstantGivesZero) {
  const auto f = [](std::span<const double>) { return 4.2; };
  EXPECT_EQ(finite_diff_grad(f, Vec{1.0, -1.0, 3.0}, 1e-5), (Vec{0.0, 0.0, 0.0}));
}

TEST(FiniteDiff, DisjointSupportDivergence) {
  // d/dtheta theta^2 * C = 2 theta C with C = 1 for the ramp weighting.
  const WeightingFn ramp{WeightingKind::ramp, 1.0};
  const auto f = [&](std::span<const double> p) { return misaligned_ikl(p[0], ramp); };
  const Vec g = finite_diff_grad(f, Vec{2.0}, 1e-5);
  EXPECT_NEAR(g[0], 2.0 * 2.0 * misaligned_weight_integral(ramp), 1e-8);
}

TEST(Ema, BlendsTowardParams) {
  Vec ema{1.0, 0.0};
  ema_update(ema, Vec{3.0, 10.0}, 0.75);
  EXPECT_DOUBLE_EQ(ema[0], 1.5);
  EXPECT_DOUBLE_EQ(ema[1], 2.5);
}
