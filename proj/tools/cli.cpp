#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "dider/dataset_io.hpp"
#include "dider/errors.hpp"
#include "dider/evaluation.hpp"
#include "dider/parallel.hpp"
#include "dider/physics_sim.hpp"
#include "dider/training.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string workdir = ".";
  std::size_t threads = available_cores();
};

struct GenerateOptions {
  std::string out = "data";
  SimConfig sim;
  std::string label_mode = "mutual";
  bool raw = false;
};

struct TrainCliOptions {
  std::string data = "data";
  std::string out = "run";
  std::string mode = "dider";
  std::size_t force_duration = 0;
  bool resume = false;
  std::size_t stop_after = 0;
  TrainConfig config;
};

struct EvalCliOptions {
  std::string data = "data";
  std::string checkpoint = "run/best.ckpt";
  std::string out = "eval";
  std::string split = "test";
  std::size_t burn_in = 5;
  std::vector<std::size_t> horizons{1, 15, 25};
  std::size_t svg = 5;
  std::size_t limit = 0;
};

std::string env_name(const std::string& long_name) {
  std::string s = "DIDER_";
  for (char c : long_name) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

template <typename T>
CLI::Option* add(CLI::App& app, const std::string& name, T& value, const std::string& help) {
  return app.add_option("--" + name, value, help)->capture_default_str()->envname(env_name(name));
}

CLI::Option* add_flag(CLI::App& app, const std::string& name, bool& value, const std::string& help) {
  return app.add_flag("--" + name, value, help)->envname(env_name(name));
}

fs::path resolve(const GlobalOptions& g, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(g.workdir) / path;
}

void write_resolved_config(const CLI::App& app, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.ini");
  out << app.config_to_str(true, false);
  if (!out) throw std::runtime_error("failed writing " + (dir / "resolved_config.ini").string());
}

TrajectoryBatch read_data(const fs::path& dir) {
  if (!fs::is_directory(dir) || !fs::exists(dir / "manifest.json")) {
    throw ConfigError("dataset directory not found: " + dir.string() + " (run `dider generate` first)");
  }
  return read_dataset(dir);
}

TrajectoryBatch pick_split(const TrajectoryBatch& data, const std::string& which) {
  if (which == "all") return data;
  const DatasetSplits s = split(data, SplitFractions{});
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  if (which == "test") return s.test;
  throw ConfigError("unknown split '" + which + "' (expected train, val, test or all)");
}

int cmd_generate(const GlobalOptions& g, GenerateOptions o, const CLI::App& app, std::ostream& out) {
  if (o.sim.n_samples == 0) throw ConfigError("--samples must be > 0");
  o.sim.label_mode = label_mode_from_string(o.label_mode);
  try {
    o.sim.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  Rng rng(o.sim.seed);
  TrajectoryBatch batch = simulate(o.sim, rng);
  if (!o.raw) batch = normalize(batch);
  const fs::path dir = resolve(g, o.out);
  DatasetProvenance prov;
  prov.seed = o.sim.seed;
  prov.generator = o.sim;
  write_dataset(batch, dir, prov);
  write_resolved_config(app, dir);
  std::size_t positive = 0;
  for (auto l : *batch.edge_labels) positive += l;
  out << "wrote " << dir.string() << ": [S,T,N,F] = [" << batch.n_samples << "," << batch.horizon << ","
      << batch.n_agents << "," << batch.feature_dim << "], interacting edge-steps "
      << static_cast<double>(positive) / static_cast<double>(batch.edge_labels->size()) << "\n";
  return 0;
}

int cmd_train(const GlobalOptions& g, TrainCliOptions o, const CLI::App& app, std::ostream& out) {
  o.config.mode = train_mode_from_string(o.mode);
  if (o.force_duration > 0) o.config.force_duration = o.force_duration;
  o.config.validate();
  const TrajectoryBatch data = read_data(resolve(g, o.data));
  const DatasetSplits parts = split(data, SplitFractions{});
  if (parts.train.n_samples == 0) throw ConfigError("dataset too small: no training samples after the split");
  const fs::path dir = resolve(g, o.out);
  write_resolved_config(app, dir);
  TrainOptions opt;
  opt.out_dir = dir;
  opt.resume = o.resume;
  opt.threads = g.threads;
  if (o.stop_after > 0) opt.stop_after = o.stop_after;
  opt.on_epoch = [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " loss " << m.loss << " nll " << m.recon_nll << " kl_d " << m.kl_duration
        << " kl_e " << m.kl_edge << " segments/edge " << m.n_segments << " val_mse " << m.val_mse << "\n";
    out.flush();
  };
  const TrainResult r = train(parts.train, parts.val, o.config, opt);
  out << "best epoch " << r.best_epoch << " (val mse " << r.best_val << "); checkpoints in " << dir.string() << "\n";
  return 0;
}

struct EvalInputs {
  std::unique_ptr<DiderModel> model;
  TrainConfig config;
  TrajectoryBatch data;
  TrajectoryBatch val;
};

EvalInputs load_eval_inputs(const GlobalOptions& g, const EvalCliOptions& o) {
  const fs::path ckpt = resolve(g, o.checkpoint);
  if (!fs::is_regular_file(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
  EvalInputs in;
  const TrajectoryBatch all = read_data(resolve(g, o.data));
  in.model = load_model(ckpt, &in.config);
  in.data = pick_split(all, o.split);
  if (o.limit > 0 && o.limit < in.data.n_samples) in.data = in.data.subset(0, o.limit);
  if (o.split == "test") in.val = split(all, SplitFractions{}).val;
  return in;
}

EvalOptions eval_options(const GlobalOptions& g, const EvalCliOptions& o, const TrainConfig& config) {
  EvalOptions eo;
  eo.t_obs = o.burn_in;
  eo.horizons = o.horizons;
  eo.threads = g.threads;
  eo.force_duration = config.effective_force_duration();
  return eo;
}

int cmd_eval(const GlobalOptions& g, const EvalCliOptions& o, const CLI::App& app, std::ostream& out) {
  EvalInputs in = load_eval_inputs(g, o);
  EvalOptions eo = eval_options(g, o, in.config);
  if (in.val.n_samples > 0 && in.val.edge_labels) {
    // Align ids on validation data, then freeze the mapping for the test split.
    eo.permutation = evaluate(*in.model, in.val, eo).permutation;
  }
  EvalRun run;
  const EvalReport report = evaluate(*in.model, in.data, eo, &run);
  const fs::path dir = resolve(g, o.out);
  write_resolved_config(app, dir);
  {
    std::ofstream txt(dir / "report.txt");
    txt << report.to_text();
    std::ofstream csv(dir / "report.csv");
    csv << report.to_csv();
    if (!txt || !csv) throw std::runtime_error("failed writing reports in " + dir.string());
  }
  export_timelines(run, dir / "timelines.csv");
  if (o.svg > 0) export_timeline_svgs(run, dir / "timelines", o.svg);
  out << report.to_text();
  return 0;
}

int cmd_export(const GlobalOptions& g, const EvalCliOptions& o, const CLI::App& app, std::ostream& out) {
  EvalInputs in = load_eval_inputs(g, o);
  EvalOptions eo = eval_options(g, o, in.config);
  // Timelines cover the whole window; the MSE horizons are irrelevant here.
  eo.horizons = {1};
  EvalRun run;
  evaluate(*in.model, in.data, eo, &run);
  const fs::path dir = resolve(g, o.out);
  write_resolved_config(app, dir);
  export_timelines(run, dir / "timelines.csv");
  if (o.svg > 0) export_timeline_svgs(run, dir / "timelines", o.svg);
  const std::string mismatch = replay_mismatch(read_timelines(dir / "timelines.csv"), run);
  if (!mismatch.empty()) throw std::runtime_error("timeline replay check failed: " + mismatch);
  out << "wrote " << (dir / "timelines.csv").string() << " (" << run.schedules.size() << " samples)\n";
  return 0;
}

void add_eval_options(CLI::App& cmd, EvalCliOptions& o) {
  add(cmd, "data", o.data, "Dataset directory");
  add(cmd, "checkpoint", o.checkpoint, "Checkpoint file");
  add(cmd, "out", o.out, "Output directory");
  add(cmd, "split", o.split, "Split to evaluate: train, val, test or all");
  add(cmd, "burn-in", o.burn_in, "Ground-truth steps before free running");
  add(cmd, "svg", o.svg, "Number of per-sample SVG timelines to write");
  add(cmd, "limit", o.limit, "Evaluate at most this many samples (0 = all)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segmented dynamic relational inference: data generation, training and evaluation", "dider"};
  app.allow_config_extras(false);
  app.set_config("--config", "", "INI file with [generate]/[train]/[eval] sections");
  app.require_subcommand(1);

  GlobalOptions g;
  add(app, "workdir", g.workdir, "Base directory for relative paths");
  add(app, "threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Simulate a labelled particle dataset");
  add(*generate, "out", gen.out, "Output dataset directory");
  add(*generate, "samples", gen.sim.n_samples, "Number of samples");
  add(*generate, "horizon", gen.sim.horizon, "Steps per sample");
  add(*generate, "agents", gen.sim.n_agents, "Particles per sample");
  add(*generate, "seed", gen.sim.seed, "Random seed");
  add(*generate, "dt", gen.sim.dt, "Integration step");
  add(*generate, "radius", gen.sim.interaction_radius, "Interaction distance");
  add(*generate, "repulsion", gen.sim.repulsion_strength, "Repulsion strength");
  add(*generate, "speed-min", gen.sim.init_speed_range[0], "Minimum initial speed");
  add(*generate, "speed-max", gen.sim.init_speed_range[1], "Maximum initial speed");
  add(*generate, "init-box", gen.sim.init_box, "Initial positions uniform in [-box, box]^2");
  add(*generate, "label-mode", gen.label_mode, "Edge labels: mutual or receiver");
  add_flag(*generate, "raw", gen.raw, "Store unnormalised states");

  TrainCliOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  add(*train_cmd, "data", tr.data, "Dataset directory");
  add(*train_cmd, "out", tr.out, "Run directory (checkpoints, metrics)");
  add(*train_cmd, "mode", tr.mode, "dnri, dider or dider-skid");
  add(*train_cmd, "force-duration", tr.force_duration, "Fixed segment length (0 = learned)");
  add(*train_cmd, "epochs", tr.config.epochs, "Epochs");
  add(*train_cmd, "batch-size", tr.config.batch_size, "Samples per update");
  add(*train_cmd, "shard-size", tr.config.shard_size, "Samples per gradient shard");
  add(*train_cmd, "lr", tr.config.lr, "Adam learning rate");
  add(*train_cmd, "beta-d", tr.config.beta_d, "Duration KL weight");
  add(*train_cmd, "beta-e", tr.config.beta_e, "Edge KL weight");
  add(*train_cmd, "cap-d", tr.config.cap_d, "Duration KL capacity");
  add(*train_cmd, "cap-e", tr.config.cap_e, "Edge KL capacity");
  add(*train_cmd, "seed", tr.config.seed, "Random seed");
  add(*train_cmd, "burn-in", tr.config.t_obs, "Burn-in steps");
  add(*train_cmd, "tau", tr.config.tau, "Gumbel-softmax temperature");
  add(*train_cmd, "edge-types", tr.config.edge_types, "Number of edge types");
  add(*train_cmd, "hidden", tr.config.hidden, "Hidden width");
  add(*train_cmd, "prior-mu0", tr.config.prior_mu0, "Duration prior mean");
  add(*train_cmd, "prior-sigma0", tr.config.prior_sigma0, "Duration prior std");
  add(*train_cmd, "out-variance", tr.config.out_variance, "Decoder output variance");
  add(*train_cmd, "val-horizon", tr.config.val_horizon, "Validation horizon (0 = middle of the window)");
  add_flag(*train_cmd, "edge-feedback", tr.config.edge_feedback, "Feed edge samples back into the prior recurrence");
  add_flag(*train_cmd, "resume", tr.resume, "Continue from <out>/last.ckpt");
  add(*train_cmd, "stop-after", tr.stop_after, "Stop after this many epochs in total (0 = run all)");

  EvalCliOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Free-running evaluation of a checkpoint");
  add_eval_options(*eval_cmd, ev);
  add(*eval_cmd, "horizons", ev.horizons, "Prediction horizons")->delimiter(',');

  EvalCliOptions ex;
  ex.out = "timelines";
  ex.svg = 0;
  auto* export_cmd = app.add_subcommand("export-timelines", "Write inferred segment timelines");
  add_eval_options(*export_cmd, ex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*generate) return cmd_generate(g, gen, app, out);
    if (*train_cmd) return cmd_train(g, tr, app, out);
    if (*eval_cmd) return cmd_eval(g, ev, app, out);
    if (*export_cmd) return cmd_export(g, ex, app, out);
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    // ConfigError, ContractError and DimensionError: the request itself is wrong.
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace DIDER_ABI
}  // namespace dider
