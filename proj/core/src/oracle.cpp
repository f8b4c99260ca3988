#include "ikl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ikl/analytic.hpp"
#include "ikl/checkpoint.hpp"
#include "ikl/training.hpp"

namespace ikl {

namespace {

OracleCheck check(std::string name, double value, double reference, double tolerance) {
  const bool ok = std::isfinite(value) ? std::abs(value - reference) <= tolerance
                                       : value == reference;
  return {std::move(name), value, reference, tolerance, ok};
}

double relative_tolerance(double reference, double rel) { return std::abs(reference) * rel; }

}  // namespace

std::vector<OracleCheck> run_oracle_battery(const OracleOptions& opts) {
  std::vector<OracleCheck> out;
  const WeightingFn ramp{WeightingKind::ramp, 1.0};
  const WeightingFn unit{WeightingKind::constant, 1.0};

  // Disjoint supports.
  {
    const DivergenceComparison d = misaligned_divergences(2.0, ramp);
    out.push_back(check("misaligned_ikl_closed_form", d.ikl, 4.0, 0.0));
    const double quad = misaligned_ikl_quadrature(2.0, ramp, misaligned_grid());
    out.push_back(check("misaligned_ikl_quadrature", quad, 4.0, relative_tolerance(4.0, 1e-3)));
    out.push_back(check("misaligned_kl_infinite", d.kl, kInfiniteDivergence, 0.0));
    out.push_back(check("misaligned_js_log2", d.js, std::numbers::ln2, 1e-15));
  }

  // Affine Gaussian generator N(theta, 1) against N(0, 1), VE, unit weight on [t_min, 1].
  const DiffusionSchedule sched = DiffusionSchedule::ve(1e-3, 1.0);
  const double theta = 1.0;
  const double closed = theta * std::log((1.0 + sched.T) / (1.0 + sched.t_min));
  const QuadratureGrid grid = default_grid(sched);
  const AffineGaussianCase affine;
  const GaussianFamily teacher_law = GaussianFamily::isotropic(1, 0.0, 1.0);
  const DiffusedGaussianScore teacher(teacher_law, sched);
  {
    const double oracle = ikl_grad_oracle(theta, affine, sched, unit, grid);
    out.push_back(check("affine_grad_oracle_vs_closed_form", oracle, closed, 1e-6));
    const double h = 1e-5;
    const double fd = (affine_ikl(theta + h, affine, sched, unit, grid) -
                       affine_ikl(theta - h, affine, sched, unit, grid)) /
                      (2.0 * h);
    out.push_back(check("affine_grad_finite_difference", fd, oracle, 1e-6));
    const double fd_quad =
        (ikl_quadrature(GaussianFamily::isotropic(1, theta + h, 1.0), teacher_law, sched, unit, grid) -
         ikl_quadrature(GaussianFamily::isotropic(1, theta - h, 1.0), teacher_law, sched, unit, grid)) /
        (2.0 * h);
    out.push_back(check("ikl_quadrature_finite_difference", fd_quad, oracle, 1e-6));

    Rng rng(opts.seed, Rng::kEvalStream);
    const Generator g = affine_generator(theta, 1.0);
    const DiffusedGaussianScore s_phi(GaussianFamily::isotropic(1, theta, 1.0), sched);
    const GradEstimate mc = instruct_grad_theta(g, s_phi, teacher, sched, unit, opts.mc_batch, rng);
    out.push_back(check("instruct_grad_monte_carlo", mc.mean[1], closed, 3.0 * mc.std_error[1]));
  }

  // Point-mass generator.
  {
    Rng rng(opts.seed + 1, Rng::kEvalStream);
    const Vec point{theta};
    const GradEstimate sds = sds_grad_theta(point, teacher, sched, unit, opts.mc_batch, rng);
    out.push_back(check("sds_grad_monte_carlo", sds.mean[0], closed, 3.0 * sds.std_error[0]));

    const double narrow = 1e-3;
    const Generator g = affine_generator(theta, 1.0, narrow);
    const DiffusedGaussianScore s_phi(GaussianFamily::isotropic(1, theta, narrow * narrow), sched);
    const GradEstimate inst = instruct_grad_theta(g, s_phi, teacher, sched, unit, opts.mc_batch, rng);
    out.push_back(check("instruct_grad_narrow_latent_vs_sds", inst.mean[1], sds.mean[0],
                        relative_tolerance(sds.mean[0], 0.05)));
  }

  // Weight concentrated at t = 0.
  {
    Rng rng(opts.seed + 2, Rng::kEvalStream);
    const Generator g = affine_generator(theta, 1.0);
    const GaussianFamily p_g = GaussianFamily::isotropic(1, theta, 1.0);
    const GradEstimate gan = gan_kl_grad_theta(g, teacher_law, p_g, opts.mc_batch, rng);
    out.push_back(check("gan_kl_grad_monte_carlo", gan.mean[1], theta, 3.0 * gan.std_error[1]));

    const double width = 1e-3;
    const DiffusionSchedule bump = DiffusionSchedule::ve(1e-3, 1e-3 + width);
    const WeightingFn w{WeightingKind::constant, 1.0 / width};
    const DiffusedGaussianScore s_phi(p_g, bump);
    const DiffusedGaussianScore s_d(teacher_law, bump);
    const GradEstimate inst = instruct_grad_theta(g, s_phi, s_d, bump, w, opts.mc_batch, rng);
    out.push_back(check("instruct_grad_bump_vs_gan_kl", inst.mean[1], gan.mean[1],
                        relative_tolerance(gan.mean[1], 0.05)));
  }

  // Positivity on random Gaussian pairs.
  {
    Rng rng(opts.seed + 3, Rng::kEvalStream);
    const DiffusionSchedule ve = DiffusionSchedule::ve();
    const QuadratureGrid g = default_grid(ve);
    double min_distinct = kInfiniteDivergence;
    double max_identical = 0.0;
    for (int k = 0; k < 200; ++k) {
      const std::size_t dim = 1 + static_cast<std::size_t>(rng.uniform() * 3.0);
      GaussianFamily p{Vec(dim), Vec(dim)};
      GaussianFamily q{Vec(dim), Vec(dim)};
      for (std::size_t j = 0; j < dim; ++j) {
        p.mean[j] = 4.0 * rng.uniform() - 2.0;
        q.mean[j] = 4.0 * rng.uniform() - 2.0;
        p.var[j] = 0.1 + 3.0 * rng.uniform();
        q.var[j] = 0.1 + 3.0 * rng.uniform();
      }
      min_distinct = std::min(min_distinct, ikl_quadrature(p, q, ve, ramp, g));
      max_identical = std::max(max_identical, std::abs(ikl_quadrature(p, p, ve, ramp, g)));
    }
    out.push_back({"ikl_positive_on_distinct_pairs", min_distinct, 0.0, 0.0, min_distinct > 0.0});
    out.push_back(check("ikl_zero_on_identical_pairs", max_identical, 0.0, 1e-10));
  }

  // Score against a finite difference of the log density.
  {
    const GaussianFamily p{{0.3, -1.2}, {0.7, 2.5}};
    const Vec x{1.1, 0.4};
    const Vec s = analytic_score(p, x);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      Vec xp = x;
      Vec xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (gaussian_log_density(p, xp) - gaussian_log_density(p, xm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - s[j]) / std::abs(s[j]));
    }
    out.push_back({"analytic_score_finite_difference", worst, 0.0, 1e-6, worst <= 1e-6});
  }
  return out;
}

std::string oracle_csv(const std::vector<OracleCheck>& checks) {
  std::string out = "name,value,reference,tolerance,status\n";
  auto real = [](double v) {
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    return format_real(v);
  };
  for (const auto& c : checks) {
    out += c.name + "," + real(c.value) + "," + real(c.reference) + "," + real(c.tolerance) + "," +
           (c.passed ? "pass" : "fail") + "\n";
  }
  return out;
}

}  // namespace ikl
