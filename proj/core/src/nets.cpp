#include "ikl/nets.hpp"

#include <cmath>
#include <vector>

namespace ikl {

Vec ScoreModel::score(std::span<const double> x, double t) const {
  require_dim(x.size(), data_dim(), "score input");
  Vec out(x.size());
  const double ts[1] = {t};
  score_batch(x, ts, out);
  return out;
}

void ScoreNet::validate() const {
  net.validate();
  if (data_dim == 0) throw DimensionError("ScoreNet data_dim must be positive");
  require_dim(net.input_dim(), data_dim + 1, "ScoreNet input layer");
  require_dim(net.output_dim(), data_dim, "ScoreNet output layer");
}

ScoreNet make_score_net(std::size_t data_dim, std::span<const std::size_t> hidden,
                        Activation activation, Rng& rng) {
  std::vector<std::size_t> sizes{data_dim + 1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data_dim);
  ScoreNet s{init_mlp(std::move(sizes), activation, rng), data_dim};
  s.validate();
  return s;
}

void score_net_inputs(std::size_t d, std::span<const double> xs, std::span<const double> ts,
                      Vec& inputs) {
  const std::size_t batch = ts.size();
  require_dim(xs.size(), batch * d, "score inputs");
  inputs.resize(batch * (d + 1));
  for (std::size_t r = 0; r < batch; ++r) {
    if (!(ts[r] > 0.0)) throw DomainError("score evaluation needs t > 0");
    double* row = inputs.data() + r * (d + 1);
    for (std::size_t i = 0; i < d; ++i) row[i] = xs[r * d + i];
    row[d] = std::log(ts[r]);
  }
}

Vec score_eval(const ScoreNet& s, std::span<const double> x, double t) {
  return NetScore(s).score(x, t);
}

void NetScore::score_batch(std::span<const double> xs, std::span<const double> ts,
                           std::span<double> out) const {
  const std::size_t d = net_->data_dim;
  require_dim(out.size(), xs.size(), "score output");
  Vec inputs;
  score_net_inputs(d, xs, ts, inputs);
  MlpWorkspace ws;
  auto y = ws.forward(net_->net, inputs, ts.size());
  std::copy(y.begin(), y.end(), out.begin());
}

void Generator::validate() const {
  net.validate();
  if (latent_dim == 0 || data_dim == 0) throw DimensionError("Generator dims must be positive");
  if (!(latent_sigma > 0.0)) throw DomainError("Generator latent_sigma must be positive");
  if (is_residual()) {
    require_dim(latent_dim, data_dim, "residual generator latent_dim");
    require_dim(net.input_dim(), latent_dim + 1, "residual generator input layer");
    if (!(*t_star > 0.0)) throw DomainError("Generator t_star must be positive");
  } else {
    require_dim(net.input_dim(), latent_dim, "Generator input layer");
  }
  require_dim(net.output_dim(), data_dim, "Generator output layer");
}

Generator make_generator(std::size_t latent_dim, std::size_t data_dim,
                         std::span<const std::size_t> hidden, Activation activation,
                         double latent_sigma, Rng& rng) {
  std::vector<std::size_t> sizes{latent_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data_dim);
  Generator g{init_mlp(std::move(sizes), activation, rng), latent_dim, data_dim, latent_sigma, std::nullopt, 0.0};
  g.validate();
  return g;
}

Generator affine_generator(double shift, double scale, double latent_sigma) {
  Generator g{zero_mlp({1, 1}, Activation::softplus), 1, 1, latent_sigma, std::nullopt, 0.0};
  g.net.params = {scale, shift};
  g.validate();
  return g;
}

Vec generate(const Generator& g, std::span<const double> z) {
  require_dim(z.size(), g.latent_dim, "generate latent");
  GeneratorWorkspace ws;
  auto x = ws.forward(g, z, 1);
  return {x.begin(), x.end()};
}

Vec sample_latents(const Generator& g, std::size_t batch, Rng& rng) {
  Vec z(batch * g.latent_dim);
  for (double& v : z) v = g.latent_sigma * rng.normal();
  return z;
}

std::span<const double> GeneratorWorkspace::forward(const Generator& g, std::span<const double> zs,
                                                    std::size_t batch) {
  require_dim(zs.size(), batch * g.latent_dim, "generator latents");
  batch_ = batch;
  if (!g.is_residual()) {
    auto y = mlp_.forward(g.net, zs, batch);
    outputs_.assign(y.begin(), y.end());
    return outputs_;
  }
  const std::size_t d = g.data_dim;
  const double log_t = std::log(*g.t_star);
  inputs_.resize(batch * (d + 1));
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t i = 0; i < d; ++i) inputs_[r * (d + 1) + i] = zs[r * d + i];
    inputs_[r * (d + 1) + d] = log_t;
  }
  auto y = mlp_.forward(g.net, inputs_, batch);
  outputs_.resize(batch * d);
  for (std::size_t k = 0; k < outputs_.size(); ++k) outputs_[k] = zs[k] + g.residual_scale * y[k];
  return outputs_;
}

void GeneratorWorkspace::backward(const Generator& g, std::span<const double> output_grad,
                                  std::span<double> param_grad, std::span<double> latent_grad) {
  require_dim(output_grad.size(), batch_ * g.data_dim, "generator output_grad");
  if (!latent_grad.empty()) require_dim(latent_grad.size(), batch_ * g.latent_dim, "generator latent_grad");
  if (!g.is_residual()) {
    mlp_.backward(g.net, output_grad, param_grad, latent_grad);
    return;
  }
  const std::size_t d = g.data_dim;
  net_grad_.resize(output_grad.size());
  for (std::size_t k = 0; k < net_grad_.size(); ++k) net_grad_[k] = g.residual_scale * output_grad[k];
  if (latent_grad.empty()) {
    mlp_.backward(g.net, net_grad_, param_grad);
    return;
  }
  net_input_grad_.resize(batch_ * (d + 1));
  mlp_.backward(g.net, net_grad_, param_grad, net_input_grad_);
  for (std::size_t r = 0; r < batch_; ++r)
    for (std::size_t i = 0; i < d; ++i)
      latent_grad[r * d + i] = output_grad[r * d + i] + net_input_grad_[r * (d + 1) + i];
}

Generator init_generator_from_teacher(const ScoreNet& teacher, const DiffusionSchedule& sched,
                                      double t_star) {
  teacher.validate();
  // For VP the denoiser divides by alpha(t*), which the residual form does not carry.
  if (sched.kind != ScheduleKind::ve)
    throw DomainError("Tweedie initialization is defined for VE schedules");
  const double sigma = alpha_sigma(sched, t_star).sigma;
  Generator g;
  g.net = teacher.net;
  g.latent_dim = teacher.data_dim;
  g.data_dim = teacher.data_dim;
  g.latent_sigma = sigma;
  g.t_star = t_star;
  g.residual_scale = sigma * sigma;
  g.validate();
  return g;
}

}  // namespace ikl
