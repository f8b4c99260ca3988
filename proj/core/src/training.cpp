#include "ikl/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace ikl {
namespace {

using Clock = std::chrono::steady_clock;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_grad(std::span<const double> grad, double limit, const char* what, std::size_t iteration) {
  const double norm = l2_norm(grad);
  if (!std::isfinite(norm) || norm > limit) {
    std::ostringstream os;
    os << what << " gradient norm " << norm << " exceeds the divergence guard " << limit
       << " at iteration " << iteration;
    throw DivergenceError(os.str());
  }
}

void check_loss(double loss, double limit, std::size_t iteration) {
  if (!std::isfinite(loss) || loss > limit) {
    std::ostringstream os;
    os << "DSM loss " << loss << " exceeds the divergence guard " << limit << " at iteration "
       << iteration;
    throw DivergenceError(os.str());
  }
}

bool should_log(std::size_t it, std::size_t total, std::size_t every) {
  return it == total || (every > 0 && it % every == 0);
}

// Accumulates per-sample contributions into a mean and standard error.
struct Moments {
  explicit Moments(std::size_t n) : sum(n, 0.0), sum_sq(n, 0.0) {}
  void add(std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum[i] += v[i];
      sum_sq[i] += v[i] * v[i];
    }
    ++count;
  }
  GradEstimate finish() const {
    GradEstimate e{Vec(sum.size()), Vec(sum.size())};
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      e.mean[i] = sum[i] / n;
      const double var = count > 1 ? std::max(0.0, (sum_sq[i] - n * e.mean[i] * e.mean[i]) / (n - 1.0)) : 0.0;
      e.std_error[i] = std::sqrt(var / n);
    }
    return e;
  }
  Vec sum;
  Vec sum_sq;
  std::size_t count = 0;
};

void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw DivergenceError(std::string("non-finite ") + what);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_phi > 0.0) || !(lr_theta > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(beta0 >= 0.0 && beta0 < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (phi_steps_per_theta_step == 0) throw ConfigError("phi_steps_per_theta_step must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");
  if (!(lr_floor >= 0.0 && lr_floor <= 1.0)) throw ConfigError("lr_floor must lie in [0, 1]");
  if (!(max_grad_norm > 0.0) || !(max_loss > 0.0)) throw ConfigError("divergence guards must be positive");
}

double TrainConfig::lr_factor(std::size_t step, std::size_t total) const {
  if (!cosine_lr || total <= 1) return 1.0;
  const double progress = static_cast<double>(step - 1) / static_cast<double>(total - 1);
  return lr_floor + (1.0 - lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string metrics_csv(std::span<const MetricsRecord> rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  auto field = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + field(r.dsm_loss) + "," + field(r.instruct_grad_norm) +
           "," + field(r.ikl_estimate) + "," + field(r.energy_distance) + "," +
           format_real(r.wall_seconds) + "\n";
  }
  return out;
}

double DsmObjective::evaluate(const ScoreNet& s, std::span<const double> batch_x0,
                              const DiffusionSchedule& sched, const WeightingFn& w,
                              TimeSampler sampler, Rng& rng, Vec& grad) {
  const std::size_t d = s.data_dim;
  if (batch_x0.empty() || batch_x0.size() % d != 0)
    throw DimensionError("DSM batch must be a non-empty multiple of the data dimension");
  const std::size_t rows = batch_x0.size() / d;
  // Antithetic mode evaluates each data row at +eps and -eps with a shared t.
  const std::size_t copies = antithetic_ ? 2 : 1;
  const std::size_t batch = rows * copies;
  xt_.resize(batch * d);
  eps_.resize(batch * d);
  ts_.resize(batch);
  scale_.resize(batch);
  const double window = sched.window();
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t r = row * copies;
    const TimeDraw td = draw_time(sched, sampler, rng);
    const auto [a, sig] = alpha_sigma(sched, td.t);
    ts_[r] = td.t;
    scale_[r] = weighting(w, sched, td.t) * td.inv_density / window;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = rng.normal();
      // Target -eps / sigma is stored directly.
      eps_[r * d + i] = -e / sig;
      xt_[r * d + i] = a * batch_x0[row * d + i] + sig * e;
      if (antithetic_) {
        eps_[(r + 1) * d + i] = e / sig;
        xt_[(r + 1) * d + i] = a * batch_x0[row * d + i] - sig * e;
      }
    }
    if (antithetic_) {
      ts_[r + 1] = ts_[r];
      scale_[r + 1] = scale_[r];
    }
  }
  score_net_inputs(d, xt_, ts_, inputs_);
  auto out = ws_.forward(s.net, inputs_, batch);
  out_grad_.resize(batch * d);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = out[r * d + i] - eps_[r * d + i];
      sq += diff * diff;
      out_grad_[r * d + i] = 2.0 * scale_[r] * diff * inv_b;
    }
    loss += scale_[r] * sq;
  }
  loss *= inv_b;
  grad.assign(s.net.params.size(), 0.0);
  ws_.backward(s.net, out_grad_, grad);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite DSM loss");
  return loss;
}

LossAndGrad dsm_loss_and_grad(const ScoreNet& s, std::span<const double> batch_x0,
                              const DiffusionSchedule& sched, const WeightingFn& w, Rng& rng,
                              TimeSampler sampler) {
  DsmObjective obj;
  LossAndGrad r;
  r.loss = obj.evaluate(s, batch_x0, sched, w, sampler, rng, r.grad);
  return r;
}

TeacherResult train_teacher(const BatchSampler& data, const ScoreNet& init, const TrainConfig& cfg,
                            const DiffusionSchedule& sched, const WeightingFn& w,
                            const RunHooks& hooks) {
  cfg.validate();
  init.validate();
  TeacherResult res{init, init, {}};
  if (cfg.iterations == 0) return res;

  Rng rng(cfg.seed, Rng::kTrainStream);
  AdamState opt = AdamState::init(init.net.params.size(), cfg.lr_phi, cfg.beta0, cfg.beta1, cfg.adam_eps);
  DsmObjective dsm;
  dsm.set_antithetic(cfg.antithetic_noise);
  Vec grad;
  const auto start = Clock::now();
  double loss_acc = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const Vec x0 = data(cfg.batch_size);
    const double loss = dsm.evaluate(res.raw, x0, sched, w, cfg.time_sampler, rng, grad);
    check_loss(loss, cfg.max_loss, it);
    check_grad(grad, cfg.max_grad_norm, "score network", it);
    opt.lr = cfg.lr_phi * cfg.lr_factor(it, cfg.iterations);
    adam_step_inplace(opt, res.raw.net.params, grad);
    ema_update(res.ema.net.params, res.raw.net.params, cfg.ema_decay);
    loss_acc += loss;
    ++loss_count;

    if (should_log(it, cfg.iterations, cfg.log_every)) {
      MetricsRecord m;
      m.iteration = it;
      m.dsm_loss = loss_acc / static_cast<double>(loss_count);
      if (hooks.record_wall_time)
        m.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      loss_acc = 0.0;
      loss_count = 0;
      res.metrics.push_back(m);
      if (hooks.on_metrics) hooks.on_metrics(m);
    }
    if (hooks.teacher_checkpoint && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0)
      hooks.teacher_checkpoint(it, res.ema);
  }
  return res;
}

GradEstimate InstructGradient::estimate(const Generator& g, const ScoreModel& s_phi,
                                        const ScoreModel& teacher, const DiffusionSchedule& sched,
                                        const WeightingFn& w, std::size_t batch, Rng& rng,
                                        TimeSampler sampler, bool with_std_error) {
  const std::size_t d = g.data_dim;
  require_dim(s_phi.data_dim(), d, "s_phi data_dim");
  require_dim(teacher.data_dim(), d, "teacher data_dim");
  if (batch == 0) throw DomainError("instruct gradient needs a non-empty batch");

  z_ = sample_latents(g, batch, rng);
  auto x0 = gen_ws_.forward(g, z_, batch);
  x0_.assign(x0.begin(), x0.end());
  xt_.resize(batch * d);
  ts_.resize(batch);
  coeff_.resize(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const TimeDraw td = draw_time(sched, sampler, rng);
    const auto [a, sig] = alpha_sigma(sched, td.t);
    ts_[r] = td.t;
    // dx_t/dtheta = alpha dx_0/dtheta
    coeff_[r] = weighting(w, sched, td.t) * td.inv_density * a;
    for (std::size_t i = 0; i < d; ++i) xt_[r * d + i] = a * x0_[r * d + i] + sig * rng.normal();
  }
  phi_out_.resize(batch * d);
  teacher_out_.resize(batch * d);
  s_phi.score_batch(xt_, ts_, phi_out_);
  teacher.score_batch(xt_, ts_, teacher_out_);

  out_grad_.resize(batch * d);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t i = 0; i < d; ++i)
      out_grad_[r * d + i] = coeff_[r] * (phi_out_[r * d + i] - teacher_out_[r * d + i]);
  require_finite(out_grad_, "score difference in the instruct gradient");

  const std::size_t n_params = g.net.params.size();
  if (!with_std_error) {
    GradEstimate e{Vec(n_params, 0.0), {}};
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (double& v : out_grad_) v *= inv_b;
    gen_ws_.backward(g, out_grad_, e.mean);
    return e;
  }
  Moments mom(n_params);
  GeneratorWorkspace single;
  Vec contrib(n_params);
  for (std::size_t r = 0; r < batch; ++r) {
    single.forward(g, std::span<const double>(z_).subspan(r * g.latent_dim, g.latent_dim), 1);
    std::fill(contrib.begin(), contrib.end(), 0.0);
    single.backward(g, std::span<const double>(out_grad_).subspan(r * d, d), contrib);
    mom.add(contrib);
  }
  return mom.finish();
}

GradEstimate instruct_grad_theta(const Generator& g, const ScoreModel& s_phi,
                                 const ScoreModel& teacher, const DiffusionSchedule& sched,
                                 const WeightingFn& w, std::size_t batch, Rng& rng,
                                 TimeSampler sampler, bool with_std_error) {
  InstructGradient ig;
  return ig.estimate(g, s_phi, teacher, sched, w, batch, rng, sampler, with_std_error);
}

GradEstimate sds_grad_theta(std::span<const double> point, const ScoreModel& teacher,
                            const DiffusionSchedule& sched, const WeightingFn& w,
                            std::size_t batch, Rng& rng, TimeSampler sampler) {
  const std::size_t d = point.size();
  require_dim(teacher.data_dim(), d, "teacher data_dim");
  if (batch == 0) throw DomainError("SDS gradient needs a non-empty batch");
  Vec xt(batch * d);
  Vec cond(batch * d);
  Vec ts(batch);
  Vec coeff(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const TimeDraw td = draw_time(sched, sampler, rng);
    const auto [a, sig] = alpha_sigma(sched, td.t);
    ts[r] = td.t;
    coeff[r] = weighting(w, sched, td.t) * td.inv_density * a;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = rng.normal();
      xt[r * d + i] = a * point[i] + sig * e;
      cond[r * d + i] = -e / sig;
    }
  }
  Vec teacher_out(batch * d);
  teacher.score_batch(xt, ts, teacher_out);
  Moments mom(d);
  Vec contrib(d);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t i = 0; i < d; ++i)
      contrib[i] = coeff[r] * (cond[r * d + i] - teacher_out[r * d + i]);
    mom.add(contrib);
  }
  GradEstimate e = mom.finish();
  require_finite(e.mean, "SDS gradient");
  return e;
}

GradEstimate gan_kl_grad_theta(const Generator& g, const GaussianFamily& p_d,
                               const GaussianFamily& p_g, std::size_t batch, Rng& rng) {
  const std::size_t d = g.data_dim;
  require_dim(p_d.dim(), d, "p_d dimension");
  require_dim(p_g.dim(), d, "p_g dimension");
  if (batch == 0) throw DomainError("GAN-KL gradient needs a non-empty batch");
  const Vec z = sample_latents(g, batch, rng);
  const std::size_t n_params = g.net.params.size();
  Moments mom(n_params);
  GeneratorWorkspace ws;
  Vec contrib(n_params);
  Vec diff(d);
  for (std::size_t r = 0; r < batch; ++r) {
    auto x = ws.forward(g, std::span<const double>(z).subspan(r * g.latent_dim, g.latent_dim), 1);
    const Vec sg = analytic_score(p_g, x);
    const Vec sd = analytic_score(p_d, x);
    for (std::size_t i = 0; i < d; ++i) diff[i] = sg[i] - sd[i];
    std::fill(contrib.begin(), contrib.end(), 0.0);
    ws.backward(g, diff, contrib);
    mom.add(contrib);
  }
  GradEstimate e = mom.finish();
  require_finite(e.mean, "GAN-KL gradient");
  return e;
}

DistillResult diff_instruct(const Generator& g0, const ScoreNet& phi0, const ScoreModel& teacher,
                            const TrainConfig& cfg, const DiffusionSchedule& sched,
                            const WeightingFn& w, const RunHooks& hooks) {
  cfg.validate();
  g0.validate();
  phi0.validate();
  require_dim(phi0.data_dim, g0.data_dim, "s_phi data_dim");
  require_dim(teacher.data_dim(), g0.data_dim, "teacher data_dim");
  DistillResult res{g0, g0, phi0, {}};
  if (cfg.iterations == 0) return res;

  Rng rng(cfg.seed, Rng::kTrainStream);
  AdamState opt_phi =
      AdamState::init(phi0.net.params.size(), cfg.lr_phi, cfg.beta0, cfg.beta1, cfg.adam_eps);
  AdamState opt_theta =
      AdamState::init(g0.net.params.size(), cfg.lr_theta, cfg.beta0, cfg.beta1, cfg.adam_eps);
  const WeightingFn dsm_w = cfg.dsm_weighting.value_or(w);
  DsmObjective dsm;
  dsm.set_antithetic(cfg.antithetic_noise);
  InstructGradient instruct;
  GeneratorWorkspace gen_ws;
  Vec phi_grad;
  Vec x0;
  std::size_t phi_updates = 0;

  auto phi_step = [&]() {
    const Vec z = sample_latents(res.raw, cfg.batch_size, rng);
    auto x = gen_ws.forward(res.raw, z, cfg.batch_size);
    x0.assign(x.begin(), x.end());
    const double loss = dsm.evaluate(res.phi, x0, sched, dsm_w, cfg.time_sampler, rng, phi_grad);
    ++phi_updates;
    check_loss(loss, cfg.max_loss, phi_updates);
    check_grad(phi_grad, cfg.max_grad_norm, "s_phi", phi_updates);
    adam_step_inplace(opt_phi, res.phi.net.params, phi_grad);
    return loss;
  };

  for (std::size_t k = 0; k < cfg.phi_warmup_steps; ++k) phi_step();

  const auto start = Clock::now();
  double loss_acc = 0.0;
  double norm_acc = 0.0;
  std::size_t acc_count = 0;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const double factor = cfg.lr_factor(it, cfg.iterations);
    opt_phi.lr = cfg.lr_phi * factor;
    opt_theta.lr = cfg.lr_theta * factor;
    double loss = 0.0;
    for (std::size_t k = 0; k < cfg.phi_steps_per_theta_step; ++k) loss += phi_step();
    loss /= static_cast<double>(cfg.phi_steps_per_theta_step);

    const NetScore s_phi(res.phi);
    const GradEstimate g = instruct.estimate(res.raw, s_phi, teacher, sched, w, cfg.batch_size, rng,
                                             cfg.time_sampler, false);
    const double norm = l2_norm(g.mean);
    if (!std::isfinite(norm) || norm > cfg.max_grad_norm) {
      if (hooks.checkpoint) hooks.checkpoint(it - 1, res.ema, res.phi);
      check_grad(g.mean, cfg.max_grad_norm, "generator", it);
    }
    adam_step_inplace(opt_theta, res.raw.net.params, g.mean);
    ema_update(res.ema.net.params, res.raw.net.params, cfg.ema_decay);
    loss_acc += loss;
    norm_acc += norm;
    ++acc_count;

    if (should_log(it, cfg.iterations, cfg.log_every)) {
      MetricsRecord m;
      m.iteration = it;
      m.dsm_loss = loss_acc / static_cast<double>(acc_count);
      m.instruct_grad_norm = norm_acc / static_cast<double>(acc_count);
      if (hooks.ikl_estimate) m.ikl_estimate = hooks.ikl_estimate(res.ema);
      if (hooks.energy_distance) m.energy_distance = hooks.energy_distance(res.ema);
      if (hooks.record_wall_time)
        m.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
      loss_acc = norm_acc = 0.0;
      acc_count = 0;
      res.metrics.push_back(m);
      if (hooks.on_metrics) hooks.on_metrics(m);
    }
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0)
      hooks.checkpoint(it, res.ema, res.phi);
  }
  return res;
}

SdsResult sds_optimize(std::span<const double> init_points, std::size_t dim, const ScoreModel& teacher,
                       const TrainConfig& cfg, const DiffusionSchedule& sched, const WeightingFn& w) {
  cfg.validate();
  if (dim == 0 || init_points.size() % dim != 0)
    throw DimensionError("SDS points must be a multiple of the data dimension");
  SdsResult res{Vec(init_points.begin(), init_points.end()), {}};
  if (cfg.iterations == 0) return res;
  const std::size_t count = init_points.size() / dim;
  Rng rng(cfg.seed, Rng::kTrainStream);
  AdamState opt = AdamState::init(res.points.size(), cfg.lr_theta, cfg.beta0, cfg.beta1, cfg.adam_eps);
  Vec grad(res.points.size());
  double norm_acc = 0.0;
  std::size_t acc_count = 0;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t p = 0; p < count; ++p) {
      const auto point = std::span<const double>(res.points).subspan(p * dim, dim);
      const GradEstimate e = sds_grad_theta(point, teacher, sched, w, cfg.batch_size, rng, cfg.time_sampler);
      std::copy(e.mean.begin(), e.mean.end(), grad.begin() + static_cast<std::ptrdiff_t>(p * dim));
    }
    const double norm = l2_norm(grad);
    check_grad(grad, cfg.max_grad_norm, "SDS", it);
    opt.lr = cfg.lr_theta * cfg.lr_factor(it, cfg.iterations);
    adam_step_inplace(opt, res.points, grad);
    norm_acc += norm;
    ++acc_count;
    if (should_log(it, cfg.iterations, cfg.log_every)) {
      MetricsRecord m;
      m.iteration = it;
      m.instruct_grad_norm = norm_acc / static_cast<double>(acc_count);
      norm_acc = 0.0;
      acc_count = 0;
      res.metrics.push_back(m);
    }
  }
  return res;
}

}  // namespace ikl
