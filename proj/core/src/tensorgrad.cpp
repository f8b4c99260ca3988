#include "ikl/tensorgrad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ikl {
namespace {

// Writes the activation and its derivative; softplus shares one exp between both.
void activate(Activation a, std::span<const double> pre, std::span<double> post,
              std::span<double> slope) {
  if (a == Activation::softplus) {
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const double x = pre[i];
      const double e = std::exp(-std::abs(x));
      const double inv = 1.0 / (1.0 + e);
      post[i] = std::max(x, 0.0) + std::log1p(e);
      slope[i] = x >= 0.0 ? inv : e * inv;
    }
  } else {
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const double y = std::tanh(pre[i]);
      post[i] = y;
      slope[i] = 1.0 - y * y;
    }
  }
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::softplus ? "softplus" : "tanh"; }

Activation activation_from_string(std::string_view name) {
  if (name == "softplus") return Activation::softplus;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected softplus or tanh)");
}

std::size_t MlpNet::param_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i] * sizes[i + 1] + sizes[i + 1];
  return n;
}

void MlpNet::validate() const {
  if (layer_sizes.size() < 2) throw DimensionError("MlpNet needs at least an input and an output layer");
  for (auto s : layer_sizes) {
    if (s == 0) throw DimensionError("MlpNet layer sizes must be positive");
  }
  require_dim(params.size(), param_count(layer_sizes), "MlpNet params");
  if (!all_finite(params)) throw DomainError("MlpNet params contain non-finite values");
}

std::string shape_string(std::span<const std::size_t> layer_sizes) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) os << (i ? "," : "") << layer_sizes[i];
  os << ']';
  return os.str();
}

MlpNet zero_mlp(std::vector<std::size_t> layer_sizes, Activation activation) {
  MlpNet net{std::move(layer_sizes), {}, activation};
  net.params.assign(MlpNet::param_count(net.layer_sizes), 0.0);
  net.validate();
  return net;
}

MlpNet init_mlp(std::vector<std::size_t> layer_sizes, Activation activation, Rng& rng) {
  MlpNet net = zero_mlp(std::move(layer_sizes), activation);
  std::size_t off = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.layer_sizes[l];
    const std::size_t out = net.layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) net.params[off + k] = scale * rng.normal();
    off += in * out + out;
  }
  return net;
}

std::span<const double> MlpWorkspace::forward(const MlpNet& net, std::span<const double> inputs,
                                              std::size_t batch) {
  const std::size_t layers = net.num_layers();
  require_dim(inputs.size(), batch * net.input_dim(), "forward input");
  require_dim(net.params.size(), MlpNet::param_count(net.layer_sizes), "forward params");
  batch_ = batch;
  pre_.resize(layers);
  slope_.resize(layers);
  post_.resize(layers + 1);
  post_[0].assign(inputs.begin(), inputs.end());

  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = net.layer_sizes[l];
    const std::size_t out = net.layer_sizes[l + 1];
    const double* w = net.params.data() + off;
    const double* b = w + in * out;

    transposed_.resize(in * out);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t i = 0; i < in; ++i) transposed_[i * out + o] = w[o * in + i];

    Vec& z = pre_[l];
    z.resize(batch * out);
    const Vec& x = post_[l];
    for (std::size_t r = 0; r < batch; ++r) std::copy(b, b + out, z.data() + r * out);
    std::size_t r = 0;
    // Four rows per pass share each weight load; every row still sums in input order.
    for (; r + 4 <= batch; r += 4) {
      double* __restrict z0 = z.data() + r * out;
      double* __restrict z1 = z0 + out;
      double* __restrict z2 = z1 + out;
      double* __restrict z3 = z2 + out;
      const double* xr = x.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double x0 = xr[i];
        const double x1 = xr[in + i];
        const double x2 = xr[2 * in + i];
        const double x3 = xr[3 * in + i];
        const double* __restrict wt = transposed_.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) {
          z0[o] += x0 * wt[o];
          z1[o] += x1 * wt[o];
          z2[o] += x2 * wt[o];
          z3[o] += x3 * wt[o];
        }
      }
    }
    for (; r < batch; ++r) {
      double* __restrict zr = z.data() + r * out;
      const double* xr = x.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = xr[i];
        const double* __restrict wt = transposed_.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) zr[o] += xi * wt[o];
      }
    }
    Vec& a = post_[l + 1];
    if (l + 1 == layers) {
      a = z;
    } else {
      a.resize(z.size());
      slope_[l].resize(z.size());
      activate(net.activation, z, a, slope_[l]);
    }
    off += in * out + out;
  }
  return post_[layers];
}

void MlpWorkspace::backward(const MlpNet& net, std::span<const double> output_grad,
                            std::span<double> param_grad, std::span<double> input_grad) {
  const std::size_t layers = net.num_layers();
  if (post_.size() != layers + 1 || post_[0].size() != batch_ * net.input_dim())
    throw DimensionError("MlpWorkspace::backward called without a matching forward pass");
  require_dim(output_grad.size(), batch_ * net.output_dim(), "backward output_grad");
  require_dim(param_grad.size(), net.params.size(), "backward param_grad");
  if (!input_grad.empty()) require_dim(input_grad.size(), batch_ * net.input_dim(), "backward input_grad");

  delta_.assign(output_grad.begin(), output_grad.end());
  std::size_t off = net.params.size();
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = net.layer_sizes[l];
    const std::size_t out = net.layer_sizes[l + 1];
    off -= in * out + out;
    const double* w = net.params.data() + off;
    double* gw = param_grad.data() + off;
    double* gb = gw + in * out;
    const Vec& x = post_[l];

    std::size_t r = 0;
    for (; r + 4 <= batch_; r += 4) {
      const double* dr = delta_.data() + r * out;
      const double* __restrict x0 = x.data() + r * in;
      const double* __restrict x1 = x0 + in;
      const double* __restrict x2 = x1 + in;
      const double* __restrict x3 = x2 + in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d0 = dr[o];
        const double d1 = dr[out + o];
        const double d2 = dr[2 * out + o];
        const double d3 = dr[3 * out + o];
        gb[o] += (d0 + d1) + (d2 + d3);
        double* __restrict gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i)
          gwo[i] += (d0 * x0[i] + d1 * x1[i]) + (d2 * x2[i] + d3 * x3[i]);
      }
    }
    for (; r < batch_; ++r) {
      const double* dr = delta_.data() + r * out;
      const double* __restrict xr = x.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        gb[o] += d;
        double* __restrict gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += d * xr[i];
      }
    }

    const bool need_input = l > 0 || !input_grad.empty();
    if (!need_input) break;
    delta_prev_.assign(batch_ * in, 0.0);
    for (r = 0; r + 4 <= batch_; r += 4) {
      const double* dr = delta_.data() + r * out;
      double* __restrict p0 = delta_prev_.data() + r * in;
      double* __restrict p1 = p0 + in;
      double* __restrict p2 = p1 + in;
      double* __restrict p3 = p2 + in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d0 = dr[o];
        const double d1 = dr[out + o];
        const double d2 = dr[2 * out + o];
        const double d3 = dr[3 * out + o];
        const double* __restrict wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          p0[i] += d0 * wo[i];
          p1[i] += d1 * wo[i];
          p2[i] += d2 * wo[i];
          p3[i] += d3 * wo[i];
        }
      }
    }
    for (; r < batch_; ++r) {
      const double* dr = delta_.data() + r * out;
      double* __restrict pr = delta_prev_.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        const double* __restrict wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) pr[i] += d * wo[i];
      }
    }
    if (l == 0) {
      std::copy(delta_prev_.begin(), delta_prev_.end(), input_grad.begin());
    } else {
      const Vec& slope = slope_[l - 1];
      for (std::size_t k = 0; k < delta_prev_.size(); ++k) delta_prev_[k] *= slope[k];
      delta_.swap(delta_prev_);
    }
  }
}

Vec forward(const MlpNet& net, std::span<const double> input) {
  require_dim(input.size(), net.input_dim(), "forward input");
  MlpWorkspace ws;
  auto out = ws.forward(net, input, 1);
  return {out.begin(), out.end()};
}

MlpGradients backward(const MlpNet& net, std::span<const double> input,
                      std::span<const double> output_grad) {
  require_dim(input.size(), net.input_dim(), "backward input");
  require_dim(output_grad.size(), net.output_dim(), "backward output_grad");
  MlpWorkspace ws;
  ws.forward(net, input, 1);
  MlpGradients g{Vec(net.params.size(), 0.0), Vec(net.input_dim(), 0.0)};
  ws.backward(net, output_grad, g.params, g.input);
  return g;
}

AdamState AdamState::init(std::size_t n, double lr, double beta0, double beta1, double eps) {
  if (!(lr > 0.0)) throw DomainError("Adam learning rate must be positive");
  if (!(beta0 >= 0.0 && beta0 < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0))
    throw DomainError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw DomainError("Adam eps must be positive");
  return AdamState{Vec(n, 0.0), Vec(n, 0.0), 0, lr, beta0, beta1, eps};
}

void adam_step_inplace(AdamState& s, std::span<double> params, std::span<const double> grads) {
  require_dim(grads.size(), params.size(), "adam grads");
  require_dim(s.first_moment.size(), params.size(), "adam first moment");
  require_dim(s.second_moment.size(), params.size(), "adam second moment");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw DivergenceError("non-finite gradient at parameter " + std::to_string(i) +
                            " (Adam step " + std::to_string(s.step_count + 1) + ")");
  }
  ++s.step_count;
  const double k = static_cast<double>(s.step_count);
  const double c0 = 1.0 - std::pow(s.beta0, k);
  const double c1 = 1.0 - std::pow(s.beta1, k);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.first_moment[i] = s.beta0 * s.first_moment[i] + (1.0 - s.beta0) * g;
    s.second_moment[i] = s.beta1 * s.second_moment[i] + (1.0 - s.beta1) * g * g;
    const double m_hat = s.first_moment[i] / c0;
    const double v_hat = s.second_moment[i] / c1;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

AdamResult adam_step(const AdamState& state, std::span<const double> params,
                     std::span<const double> grads) {
  AdamResult r{Vec(params.begin(), params.end()), state};
  adam_step_inplace(r.state, r.params, grads);
  return r;
}

Vec finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> params, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad step must be positive");
  Vec p(params.begin(), params.end());
  Vec g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void ema_update(std::span<double> ema, std::span<const double> params, double decay) {
  require_dim(params.size(), ema.size(), "ema params");
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * params[i];
}

}  // namespace ikl
