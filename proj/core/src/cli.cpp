#include "ikl/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <CLI11.hpp>

#include "ikl/checkpoint.hpp"
#include "ikl/config.hpp"
#include "ikl/datasets.hpp"
#include "ikl/nets.hpp"
#include "ikl/oracle.hpp"
#include "ikl/svg.hpp"
#include "ikl/training.hpp"
#include "ikl/two_sample.hpp"

namespace ikl {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string command;
  std::string config;
  std::string out;
  std::string teacher;
  std::string generator;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::size_t n = 1000;
};

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig cfg = opt.config.empty() ? ExperimentConfig{} : load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out.empty()) cfg.out_dir = opt.out;
  if (!opt.teacher.empty()) cfg.teacher_checkpoint = opt.teacher;
  if (!opt.generator.empty()) cfg.generator_checkpoint = opt.generator;
  cfg.train.seed = cfg.seed;
  return cfg;
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  write_file_atomic(dir / "config.json", config_to_json(cfg));
  return dir;
}

fs::path checkpoint_dir(const fs::path& out) {
  const fs::path dir = out / "checkpoints";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  return dir;
}

std::string numbered(const char* stem, std::size_t it) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%08zu.json", stem, it);
  return buf;
}

std::string samples_csv(std::span<const double> xs, std::size_t dim) {
  std::string out;
  for (std::size_t j = 0; j < dim; ++j) out += (j ? ",x" : "x") + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < xs.size(); i += dim) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (j) out += ",";
      out += format_real(xs[i + j]);
    }
    out += "\n";
  }
  return out;
}

Vec generate_batch(const Generator& g, std::span<const double> z) {
  GeneratorWorkspace ws;
  const auto x = ws.forward(g, z, z.size() / g.latent_dim);
  return {x.begin(), x.end()};
}

std::vector<std::size_t> teacher_layers(const ExperimentConfig& cfg) {
  const std::size_t d = cfg.dataset.data_dim();
  std::vector<std::size_t> sizes{d + 1};
  sizes.insert(sizes.end(), cfg.teacher_net.hidden.begin(), cfg.teacher_net.hidden.end());
  sizes.push_back(d);
  return sizes;
}

// Shape the config describes for a generator checkpoint.
std::vector<std::size_t> generator_layers(const ExperimentConfig& cfg) {
  if (cfg.generator.init == GeneratorInit::tweedie) return teacher_layers(cfg);
  std::vector<std::size_t> sizes{cfg.generator.latent_dim};
  sizes.insert(sizes.end(), cfg.generator.net.hidden.begin(), cfg.generator.net.hidden.end());
  sizes.push_back(cfg.dataset.data_dim());
  return sizes;
}

ScoreNet require_teacher(const ExperimentConfig& cfg) {
  if (!cfg.teacher_checkpoint) throw ConfigError("a teacher checkpoint is required (--teacher)");
  const std::vector<std::size_t> expected = teacher_layers(cfg);
  return load_score_net(*cfg.teacher_checkpoint, std::span<const std::size_t>(expected));
}

// Held-out data and fixed latents, reused at every metrics row so the
// energy-distance curve reflects only the generator.
struct EnergyProbe {
  Vec held_out;
  Vec latents;
  std::size_t dim = 0;

  std::optional<double> operator()(const Generator& g) const {
    return energy_distance(generate_batch(g, latents), held_out, dim);
  }
};

std::optional<EnergyProbe> make_probe(const ExperimentConfig& cfg, const Generator& g) {
  if (cfg.eval.samples == 0) return std::nullopt;
  if (cfg.dataset.data_dim() != g.data_dim) {
    throw ConfigError("dataset dimension " + std::to_string(cfg.dataset.data_dim()) +
                      " does not match generator data_dim " + std::to_string(g.data_dim));
  }
  Rng rng(cfg.seed, Rng::kEvalStream);
  EnergyProbe probe;
  probe.dim = g.data_dim;
  probe.held_out = cfg.dataset.sample(cfg.eval.samples, rng);
  probe.latents = sample_latents(g, cfg.eval.samples, rng);
  return probe;
}

void plot_if_2d(std::span<const double> xs, std::size_t dim, const fs::path& path,
                const std::string& title) {
  if (dim != 2) return;
  ScatterOptions opts;
  opts.title = title;
  render_scatter(xs, path, opts);
}

int train_teacher_cmd(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const fs::path dir = prepare_out_dir(cfg);
  const std::size_t d = cfg.dataset.data_dim();
  Rng init_rng(cfg.seed, Rng::kInitStream);
  const ScoreNet init = make_score_net(d, cfg.teacher_net.hidden, cfg.teacher_net.activation, init_rng);
  DataSampler sampler(cfg.dataset, cfg.seed);
  const BatchSampler data = [&](std::size_t n) { return sampler.next(n); };

  RunHooks hooks;
  if (cfg.train.checkpoint_every > 0) {
    const fs::path ckpt = checkpoint_dir(dir);
    hooks.teacher_checkpoint = [ckpt](std::size_t it, const ScoreNet& s) {
      save_score_net(ckpt / numbered("teacher", it), s);
    };
  }
  const WeightingFn w = cfg.train.dsm_weighting.value_or(cfg.weighting);
  const TeacherResult res = train_teacher(data, init, cfg.train, cfg.schedule, w, hooks);
  save_score_net(dir / "teacher.json", res.ema);
  write_file_atomic(dir / "metrics.csv", metrics_csv(res.metrics));
  out << (dir / "teacher.json").string() << "\n";
  return kExitOk;
}

int distill_cmd(const Options& opt, std::ostream& out, bool refine) {
  const ExperimentConfig cfg = resolve_config(opt);
  const ScoreNet teacher = require_teacher(cfg);
  const std::size_t d = teacher.data_dim;
  Rng init_rng(cfg.seed, Rng::kInitStream);

  Generator g0;
  if (refine) {
    if (!cfg.generator_checkpoint) throw ConfigError("refine needs a generator checkpoint (--generator)");
    const std::vector<std::size_t> expected = generator_layers(cfg);
    g0 = load_generator(*cfg.generator_checkpoint, std::span<const std::size_t>(expected));
  } else if (cfg.generator.init == GeneratorInit::tweedie) {
    if (cfg.schedule.kind != ScheduleKind::ve) {
      throw ConfigError("the tweedie generator init requires the ve schedule");
    }
    const double t_star = cfg.generator.sigma_star * cfg.generator.sigma_star;
    if (!cfg.schedule.contains(t_star)) {
      throw ConfigError("generator.sigma_star puts t* outside the schedule window");
    }
    g0 = init_generator_from_teacher(teacher, cfg.schedule, t_star);
  } else {
    g0 = make_generator(cfg.generator.latent_dim, d, cfg.generator.net.hidden,
                        cfg.generator.net.activation, cfg.generator.latent_sigma, init_rng);
  }
  if (g0.data_dim != d) {
    throw DimensionError("generator data_dim " + std::to_string(g0.data_dim) +
                         " does not match teacher data_dim " + std::to_string(d));
  }
  const ScoreNet phi0 = cfg.phi.copy_teacher
                            ? teacher
                            : make_score_net(d, cfg.phi.net.hidden, cfg.phi.net.activation, init_rng);

  const fs::path dir = prepare_out_dir(cfg);
  RunHooks hooks;
  const std::optional<EnergyProbe> probe = make_probe(cfg, g0);
  if (probe) hooks.energy_distance = *probe;
  // The loop also calls this hook right before aborting on divergence.
  const bool periodic = cfg.train.checkpoint_every > 0;
  hooks.checkpoint = [dir, periodic](std::size_t it, const Generator& g, const ScoreNet& phi) {
    const fs::path ckpt = checkpoint_dir(dir);
    save_generator(ckpt / numbered("generator", it), g);
    if (periodic) save_score_net(ckpt / numbered("phi", it), phi);
  };

  const NetScore teacher_score(teacher);
  const DistillResult res = diff_instruct(g0, phi0, teacher_score, cfg.train, cfg.schedule,
                                          cfg.weighting, hooks);
  save_generator(dir / "generator.json", res.ema);
  save_score_net(dir / "phi.json", res.phi);
  write_file_atomic(dir / "metrics.csv", metrics_csv(res.metrics));
  if (d == 2) {
    Rng rng(cfg.seed, Rng::kEvalStream);
    const Vec z = sample_latents(res.ema, 2000, rng);
    plot_if_2d(generate_batch(res.ema, z), 2, dir / "samples.svg", refine ? "refined" : "distilled");
  }
  out << (dir / "generator.json").string() << "\n";
  return kExitOk;
}

int sds_cmd(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const ScoreNet teacher = require_teacher(cfg);
  const std::size_t d = teacher.data_dim;
  Rng init_rng(cfg.seed, Rng::kInitStream);
  Vec points(cfg.sds.points * d);
  for (double& p : points) p = cfg.sds.init_std * init_rng.normal();
  const fs::path dir = prepare_out_dir(cfg);
  const NetScore teacher_score(teacher);
  const SdsResult res = sds_optimize(points, d, teacher_score, cfg.train, cfg.schedule, cfg.weighting);
  write_file_atomic(dir / "points.csv", samples_csv(res.points, d));
  write_file_atomic(dir / "metrics.csv", metrics_csv(res.metrics));
  plot_if_2d(res.points, d, dir / "points.svg", "sds points");
  out << (dir / "points.csv").string() << "\n";
  return kExitOk;
}

int oracle_cmd(const Options& opt, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve_config(opt);
  const auto checks = run_oracle_battery({cfg.seed, cfg.oracle.mc_batch});
  const std::string csv = oracle_csv(checks);
  if (!opt.out.empty() || !opt.config.empty()) {
    const fs::path dir = prepare_out_dir(cfg);
    write_file_atomic(dir / "oracle.csv", csv);
  }
  out << csv;
  for (const auto& c : checks) {
    if (!c.passed) {
      err << "oracle check failed: " << c.name << "\n";
      return kExitUsage;
    }
  }
  return kExitOk;
}

Generator require_generator(const Options& opt) {
  if (opt.generator.empty()) throw ConfigError("--generator is required");
  return load_generator(opt.generator);
}

int sample_cmd(const Options& opt, std::ostream& out) {
  const Generator g = require_generator(opt);
  Rng rng(opt.seed.value_or(0), Rng::kEvalStream);
  const Vec z = sample_latents(g, opt.n, rng);
  const std::string csv = samples_csv(generate_batch(g, z), g.data_dim);
  if (opt.out.empty()) {
    out << csv;
  } else {
    fs::create_directories(opt.out);
    write_file_atomic(fs::path(opt.out) / "samples.csv", csv);
    out << (fs::path(opt.out) / "samples.csv").string() << "\n";
  }
  return kExitOk;
}

int eval_cmd(const Options& opt, std::ostream& out) {
  const Generator g = require_generator(opt);
  if (opt.dataset.empty()) throw ConfigError("--dataset is required");
  const ToyDataset ds = load_dataset(opt.dataset);
  if (ds.data_dim() != g.data_dim) {
    throw DimensionError("dataset dimension " + std::to_string(ds.data_dim()) +
                         " does not match generator data_dim " + std::to_string(g.data_dim));
  }
  if (opt.n < 2) throw ConfigError("--n must be at least 2");
  Rng rng(opt.seed.value_or(0), Rng::kEvalStream);
  const Vec data = ds.sample(opt.n, rng);
  const Vec z = sample_latents(g, opt.n, rng);
  const double ed = energy_distance(generate_batch(g, z), data, g.data_dim);
  out << "energy_distance,samples\n" << format_real(ed) << "," << opt.n << "\n";
  return kExitOk;
}

int plot_cmd(const Options& opt, std::ostream& out) {
  if (opt.generator.empty() == opt.dataset.empty()) {
    throw ConfigError("plot needs exactly one of --generator or --dataset");
  }
  Rng rng(opt.seed.value_or(0), Rng::kEvalStream);
  Vec xs;
  std::size_t dim = 0;
  std::string title;
  if (!opt.generator.empty()) {
    const Generator g = load_generator(opt.generator);
    xs = generate_batch(g, sample_latents(g, opt.n, rng));
    dim = g.data_dim;
    title = "generator";
  } else {
    const ToyDataset ds = load_dataset(opt.dataset);
    xs = ds.sample(opt.n, rng);
    dim = ds.data_dim();
    title = to_string(ds.kind);
  }
  if (dim != 2) throw DimensionError("plot needs 2-D samples, got dimension " + std::to_string(dim));
  const fs::path dir = opt.out.empty() ? fs::path(".") : fs::path(opt.out);
  fs::create_directories(dir);
  ScatterOptions so;
  so.title = title;
  render_scatter(xs, dir / "plot.svg", so);
  out << (dir / "plot.svg").string() << "\n";
  return kExitOk;
}

int dispatch(const Options& opt, std::ostream& out, std::ostream& err) {
  if (opt.command == "train-teacher") return train_teacher_cmd(opt, out);
  if (opt.command == "distill") return distill_cmd(opt, out, false);
  if (opt.command == "refine") return distill_cmd(opt, out, true);
  if (opt.command == "sds") return sds_cmd(opt, out);
  if (opt.command == "oracle") return oracle_cmd(opt, out, err);
  if (opt.command == "sample") return sample_cmd(opt, out);
  if (opt.command == "eval") return eval_cmd(opt, out);
  if (opt.command == "plot") return plot_cmd(opt, out);
  err << "unknown command " << opt.command << "\n";
  return kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score-model distillation lab"};
  app.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config JSON");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", seed, "seed (overrides the config)");
  };
  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"train-teacher", "train a score network by denoising score matching"},
      {"distill", "distill the teacher into a one-step generator"},
      {"refine", "continue distillation from an existing generator"},
      {"sds", "optimize point masses with the SDS gradient"},
      {"oracle", "run the closed-form check battery"},
      {"sample", "draw samples from a generator checkpoint"},
      {"eval", "energy distance between a generator and a dataset"},
      {"plot", "SVG scatter of generator or dataset samples"},
  };
  std::vector<CLI::App*> subs;
  for (const Spec& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    sub->add_option("--teacher", opt.teacher, "teacher score checkpoint");
    sub->add_option("--generator", opt.generator, "generator checkpoint");
    sub->add_option("--dataset", opt.dataset, "dataset description JSON");
    sub->add_option("--n", opt.n, "number of samples");
    subs.push_back(sub);
  }

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("ikl");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (CLI::App* sub : subs) {
    if (sub->parsed()) {
      opt.command = sub->get_name();
      if (sub->count("--seed") > 0) opt.seed = seed;
    }
  }

  try {
    return dispatch(opt, out, err);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace ikl
