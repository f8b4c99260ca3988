#include "ikl/config.hpp"

#include <cmath>
#include <set>
#include <type_traits>
#include <vector>

#include "ikl/checkpoint.hpp"
#include "json_util.hpp"

namespace ikl {

using detail::Json;

std::string_view to_string(GeneratorInit init) {
  return init == GeneratorInit::fresh ? "fresh" : "tweedie";
}

namespace {

GeneratorInit generator_init_from_string(std::string_view name) {
  if (name == "fresh") return GeneratorInit::fresh;
  if (name == "tweedie") return GeneratorInit::tweedie;
  throw ConfigError("unknown generator init '" + std::string(name) + "'");
}

// Reads the keys of one JSON object, remembering which were consumed so the
// leftovers can be reported.
class Section {
 public:
  Section(const Json& j, std::string path, std::string_view source)
      : j_(j), path_(std::move(path)), source_(source) {
    if (!j_.is_object()) fail(where() + " must be a JSON object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    // nlohmann converts -1 or 2.5 to an unsigned count without complaint.
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) fail("key '" + dotted(key) + "' must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (v.is_array()) {
        for (const Json& e : v)
          if (!e.is_number_unsigned())
            fail("key '" + dotted(key) + "' must hold non-negative integers");
      }
    }
    try {
      out = v.get<T>();
    } catch (const Json::exception&) {
      fail("key '" + dotted(key) + "' has the wrong type (" + j_.at(key).type_name() + ")");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  template <typename Parse>
  void get_enum(const char* key, Parse parse) {
    std::string name;
    get(key, name);
    if (!j_.contains(key)) return;
    try {
      parse(name);
    } catch (const ConfigError& e) {
      fail("key '" + dotted(key) + "': " + e.what());
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), dotted(key), source_);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail("unknown key '" + dotted(item.key().c_str()) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(std::string(source_) + ": " + msg);
  }

 private:
  std::string dotted(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }

  const Json& j_;
  std::string path_;
  std::string_view source_;
  std::set<std::string> seen_;
};

void read_net(Section s, NetSpec& net) {
  s.get("hidden", net.hidden);
  s.get_enum("activation", [&](const std::string& n) { net.activation = activation_from_string(n); });
  s.finish();
}

void read_weighting(Section s, WeightingFn& w) {
  s.get_enum("kind", [&](const std::string& n) { w.kind = weighting_kind_from_string(n); });
  s.get("scale", w.scale);
  s.finish();
}

void read_schedule(Section s, DiffusionSchedule& sched) {
  s.get_enum("kind", [&](const std::string& n) { sched.kind = schedule_kind_from_string(n); });
  s.get("t_min", sched.t_min);
  s.get("beta_min", sched.beta_min);
  s.get("beta_max", sched.beta_max);
  const bool has_T = s.has("T");
  if (has_T) s.get("T", sched.T);
  std::optional<double> sigma_max;
  s.get_optional("sigma_max", sigma_max);
  if (sigma_max) {
    if (sched.kind != ScheduleKind::ve) s.fail("schedule.sigma_max applies to the ve schedule only");
    const double T = *sigma_max * *sigma_max;
    if (has_T && std::abs(T - sched.T) > 1e-12 * T) {
      s.fail("schedule.sigma_max and schedule.T disagree");
    }
    sched.T = T;
  } else if (!has_T && sched.kind == ScheduleKind::vp) {
    sched.T = 1.0;
  }
  s.finish();
}

void read_dataset(Section s, ToyDataset& ds) {
  s.get_enum("kind", [&](const std::string& n) { ds.kind = dataset_kind_from_string(n); });
  s.get("dim", ds.dim);
  s.get("components", ds.components);
  s.get("radius", ds.radius);
  s.get("std", ds.std);
  s.get("mean", ds.mean);
  s.finish();
}

void read_train(Section s, TrainConfig& t) {
  s.get("lr_phi", t.lr_phi);
  s.get("lr_theta", t.lr_theta);
  s.get("beta0", t.beta0);
  s.get("beta1", t.beta1);
  s.get("adam_eps", t.adam_eps);
  s.get("batch_size", t.batch_size);
  s.get("iterations", t.iterations);
  s.get("phi_steps_per_theta_step", t.phi_steps_per_theta_step);
  s.get("phi_warmup_steps", t.phi_warmup_steps);
  s.get("ema_decay", t.ema_decay);
  s.get_enum("time_sampler", [&](const std::string& n) { t.time_sampler = time_sampler_from_string(n); });
  s.get("antithetic_noise", t.antithetic_noise);
  s.get("cosine_lr", t.cosine_lr);
  s.get("lr_floor", t.lr_floor);
  if (s.has("dsm_weighting")) {
    WeightingFn w;
    read_weighting(s.child("dsm_weighting"), w);
    t.dsm_weighting = w;
  }
  s.get("log_every", t.log_every);
  s.get("checkpoint_every", t.checkpoint_every);
  s.get("max_grad_norm", t.max_grad_norm);
  s.get("max_loss", t.max_loss);
  s.finish();
}

void read_generator(Section s, GeneratorSpec& g) {
  s.get_enum("init", [&](const std::string& n) { g.init = generator_init_from_string(n); });
  if (s.has("net")) read_net(s.child("net"), g.net);
  s.get("latent_dim", g.latent_dim);
  s.get("latent_sigma", g.latent_sigma);
  s.get("sigma_star", g.sigma_star);
  s.finish();
}

nlohmann::ordered_json net_json(const NetSpec& n) {
  return nlohmann::ordered_json{{"hidden", n.hidden}, {"activation", std::string(to_string(n.activation))}};
}

nlohmann::ordered_json weighting_json(const WeightingFn& w) {
  return nlohmann::ordered_json{{"kind", std::string(to_string(w.kind))}, {"scale", w.scale}};
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    schedule.validate();
    dataset.validate();
    train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(weighting.scale > 0.0)) throw ConfigError("weighting.scale must be > 0");
  if (teacher_net.hidden.empty() || generator.net.hidden.empty() || phi.net.hidden.empty()) {
    throw ConfigError("net hidden layer lists must be nonempty");
  }
  if (generator.latent_dim == 0) throw ConfigError("generator.latent_dim must be >= 1");
  if (!(generator.latent_sigma > 0.0)) throw ConfigError("generator.latent_sigma must be > 0");
  if (!(generator.sigma_star > 0.0)) throw ConfigError("generator.sigma_star must be > 0");
  if (eval.samples == 1) throw ConfigError("eval.samples must be 0 or >= 2");
  if (sds.points == 0) throw ConfigError("sds.points must be >= 1");
  if (oracle.mc_batch < 100) throw ConfigError("oracle.mc_batch must be >= 100");
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  const Json doc = detail::parse_json(text, source);
  ExperimentConfig cfg;
  Section root(doc, "", source);
  root.get("seed", cfg.seed);
  root.get("out_dir", cfg.out_dir);
  if (root.has("schedule")) read_schedule(root.child("schedule"), cfg.schedule);
  if (root.has("weighting")) read_weighting(root.child("weighting"), cfg.weighting);
  if (root.has("dataset")) read_dataset(root.child("dataset"), cfg.dataset);
  if (root.has("teacher_net")) read_net(root.child("teacher_net"), cfg.teacher_net);
  if (root.has("generator")) read_generator(root.child("generator"), cfg.generator);
  if (root.has("phi")) {
    Section s = root.child("phi");
    s.get("copy_teacher", cfg.phi.copy_teacher);
    if (s.has("net")) read_net(s.child("net"), cfg.phi.net);
    s.finish();
  }
  if (root.has("train")) read_train(root.child("train"), cfg.train);
  if (root.has("eval")) {
    Section s = root.child("eval");
    s.get("samples", cfg.eval.samples);
    s.finish();
  }
  if (root.has("sds")) {
    Section s = root.child("sds");
    s.get("points", cfg.sds.points);
    s.get("init_std", cfg.sds.init_std);
    s.finish();
  }
  if (root.has("oracle")) {
    Section s = root.child("oracle");
    s.get("mc_batch", cfg.oracle.mc_batch);
    s.finish();
  }
  root.get_optional("teacher_checkpoint", cfg.teacher_checkpoint);
  root.get_optional("generator_checkpoint", cfg.generator_checkpoint);
  root.finish();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return cfg;
}

ToyDataset parse_dataset(std::string_view text, std::string_view source) {
  const Json doc = detail::parse_json(text, source);
  ToyDataset ds;
  read_dataset(Section(doc, "", source), ds);
  try {
    ds.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return ds;
}

ToyDataset load_dataset(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_dataset(text, path.string());
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["schedule"] = {{"kind", std::string(to_string(cfg.schedule.kind))},
                   {"t_min", cfg.schedule.t_min},
                   {"T", cfg.schedule.T},
                   {"beta_min", cfg.schedule.beta_min},
                   {"beta_max", cfg.schedule.beta_max}};
  j["weighting"] = weighting_json(cfg.weighting);
  j["dataset"] = {{"kind", to_string(cfg.dataset.kind)},  {"dim", cfg.dataset.dim},
                  {"components", cfg.dataset.components}, {"radius", cfg.dataset.radius},
                  {"std", cfg.dataset.std},               {"mean", cfg.dataset.mean}};
  j["teacher_net"] = net_json(cfg.teacher_net);
  j["generator"] = {{"init", std::string(to_string(cfg.generator.init))},
                    {"net", net_json(cfg.generator.net)},
                    {"latent_dim", cfg.generator.latent_dim},
                    {"latent_sigma", cfg.generator.latent_sigma},
                    {"sigma_star", cfg.generator.sigma_star}};
  j["phi"] = {{"copy_teacher", cfg.phi.copy_teacher}, {"net", net_json(cfg.phi.net)}};
  const TrainConfig& t = cfg.train;
  nlohmann::ordered_json train = {{"lr_phi", t.lr_phi},
                                  {"lr_theta", t.lr_theta},
                                  {"beta0", t.beta0},
                                  {"beta1", t.beta1},
                                  {"adam_eps", t.adam_eps},
                                  {"batch_size", t.batch_size},
                                  {"iterations", t.iterations},
                                  {"phi_steps_per_theta_step", t.phi_steps_per_theta_step},
                                  {"phi_warmup_steps", t.phi_warmup_steps},
                                  {"ema_decay", t.ema_decay},
                                  {"time_sampler", std::string(to_string(t.time_sampler))},
                                  {"antithetic_noise", t.antithetic_noise},
                                  {"cosine_lr", t.cosine_lr},
                                  {"lr_floor", t.lr_floor}};
  if (t.dsm_weighting) train["dsm_weighting"] = weighting_json(*t.dsm_weighting);
  train["log_every"] = t.log_every;
  train["checkpoint_every"] = t.checkpoint_every;
  train["max_grad_norm"] = t.max_grad_norm;
  train["max_loss"] = t.max_loss;
  j["train"] = train;
  j["eval"] = {{"samples", cfg.eval.samples}};
  j["sds"] = {{"points", cfg.sds.points}, {"init_std", cfg.sds.init_std}};
  j["oracle"] = {{"mc_batch", cfg.oracle.mc_batch}};
  j["teacher_checkpoint"] =
      cfg.teacher_checkpoint ? nlohmann::ordered_json(*cfg.teacher_checkpoint) : nlohmann::ordered_json();
  j["generator_checkpoint"] =
      cfg.generator_checkpoint ? nlohmann::ordered_json(*cfg.generator_checkpoint) : nlohmann::ordered_json();
  return j.dump(2) + "\n";
}

}  // namespace ikl
