#include "dider/training.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dider/errors.hpp"
#include "dider/evaluation.hpp"
#include "dider/parallel.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) throw ConfigError("train config: bad value for '" + key + "': '" + value + "'");
  return out;
}

/// Shortest text that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_exact(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    if (s == "nan") return std::nan("");
    throw CorruptDataError("bad number '" + s + "' in metrics history");
  }
  return v;
}

double sign(double v) { return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; }

RunOptions training_run_options(const TrainConfig& config, const std::vector<SegmentSchedule>* frozen) {
  RunOptions opt;
  opt.t_obs = config.t_obs;
  opt.rollout = RolloutMode::teacher_forced;
  opt.edge_source = EdgeSource::encoder;
  opt.edge_mode = EdgeSampleMode::soft;
  opt.sample_durations = true;
  opt.force_duration = config.effective_force_duration();
  opt.frozen_durations = frozen;
  opt.compute_kl = true;
  return opt;
}

struct ShardTerms {
  Tensor nll;  // summed over samples
  Tensor kl_duration;
  Tensor kl_edge;
  double segments = 0;
  std::size_t edges = 0;
};

ShardTerms shard_terms(const DiderModel& model, const std::vector<Tensor>& steps, std::size_t n_agents,
                       const TrainConfig& config, Rng& rng, const std::vector<SegmentSchedule>* frozen) {
  if (steps.size() < config.t_obs + 1) {
    throw ContractError("elbo: horizon " + std::to_string(steps.size()) + " is shorter than burn-in + 1");
  }
  RunOutput out = model.run(steps, n_agents, training_run_options(config, frozen), rng);
  const std::vector<Tensor> targets(steps.begin() + 1, steps.end());
  ShardTerms t;
  t.nll = nll(stack_rows(out.predictions), stack_rows(targets), model.config().out_variance);
  t.kl_duration = out.kl_duration;
  t.kl_edge = out.kl_edge;
  for (const auto& s : out.schedules) {
    for (const auto& segs : s.edges) t.segments += static_cast<double>(segs.size());
    t.edges += s.edges.size();
  }
  return t;
}

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<EpochMetrics> parse_history(const std::string& text) {
  std::vector<EpochMetrics> out;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw CorruptDataError("bad metrics row '" + line + "' in checkpoint");
    EpochMetrics m;
    m.epoch = static_cast<std::size_t>(parse_exact(f[0]));
    m.loss = parse_exact(f[1]);
    m.recon_nll = parse_exact(f[2]);
    m.kl_duration = parse_exact(f[3]);
    m.kl_edge = parse_exact(f[4]);
    m.n_segments = parse_exact(f[5]);
    m.val_mse = parse_exact(f[6]);
    out.push_back(m);
  }
  return out;
}

std::string history_text(const std::vector<EpochMetrics>& history) {
  std::string s = EpochMetrics::csv_header() + "\n";
  for (const auto& m : history) s += m.csv_row() + "\n";
  return s;
}

std::vector<std::uint64_t> dims_of(const Tensor& t) {
  return std::vector<std::uint64_t>(t.shape().begin(), t.shape().end());
}

std::vector<float> to_f32(std::span<const real> v) { return std::vector<float>(v.begin(), v.end()); }

void copy_into(std::span<real> dst, const std::vector<float>& src, const std::string& name) {
  if (dst.size() != src.size()) {
    throw CorruptDataError("checkpoint entry '" + name + "' has " + std::to_string(src.size()) + " values, expected " +
                           std::to_string(dst.size()));
  }
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::dider: return "dider";
    case TrainMode::dider_skid_duration: return "dider-skid";
    case TrainMode::dnri_baseline: return "dnri";
  }
  return "dider";
}

TrainMode train_mode_from_string(const std::string& text) {
  if (text == "dider") return TrainMode::dider;
  if (text == "dider-skid" || text == "dider_skid_duration") return TrainMode::dider_skid_duration;
  if (text == "dnri" || text == "dnri_baseline") return TrainMode::dnri_baseline;
  throw ConfigError("unknown training mode '" + text + "' (expected dnri, dider or dider-skid)");
}

void TrainConfig::validate() const {
  if (!(beta_d >= 0) || !(beta_e >= 0)) throw ConfigError("train config: beta_d and beta_e must be >= 0");
  if (!(cap_d >= 0) || !(cap_e >= 0)) throw ConfigError("train config: cap_d and cap_e must be >= 0");
  if (!(lr > 0)) throw ConfigError("train config: lr must be > 0");
  if (batch_size == 0) throw ConfigError("train config: batch_size must be > 0");
  if (shard_size == 0) throw ConfigError("train config: shard_size must be > 0");
  if (t_obs < 1) throw ConfigError("train config: t_obs must be >= 1");
  if (force_duration && *force_duration < 1) throw ConfigError("train config: force_duration must be >= 1");
  model_config().validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.hidden = hidden;
  m.decoder_hidden = hidden;
  m.edge_types = edge_types;
  m.tau = tau;
  m.duration_variant =
      mode == TrainMode::dider_skid_duration ? DurationVariant::full_trajectory : DurationVariant::past_only;
  m.edge_feedback = edge_feedback;
  m.prior_mu0 = prior_mu0;
  m.prior_sigma0 = prior_sigma0;
  m.out_variance = out_variance;
  m.init_seed = seed;
  return m;
}

std::optional<std::size_t> TrainConfig::effective_force_duration() const {
  if (mode == TrainMode::dnri_baseline) return 1;
  return force_duration;
}

std::size_t TrainConfig::validation_horizon(std::size_t data_horizon) const {
  if (val_horizon > 0) return val_horizon;
  if (data_horizon <= t_obs) throw ContractError("validation: data shorter than burn-in");
  return std::max<std::size_t>(1, (data_horizon - t_obs + 1) / 2);
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "beta_d = " << exact(beta_d) << "\n"
     << "beta_e = " << exact(beta_e) << "\n"
     << "cap_d = " << exact(cap_d) << "\n"
     << "cap_e = " << exact(cap_e) << "\n"
     << "lr = " << exact(lr) << "\n"
     << "epochs = " << epochs << "\n"
     << "batch_size = " << batch_size << "\n"
     << "shard_size = " << shard_size << "\n"
     << "seed = " << seed << "\n"
     << "t_obs = " << t_obs << "\n"
     << "mode = " << to_string(mode) << "\n"
     << "force_duration = " << (force_duration ? std::to_string(*force_duration) : std::string("none")) << "\n"
     << "tau = " << exact(tau) << "\n"
     << "edge_types = " << edge_types << "\n"
     << "hidden = " << hidden << "\n"
     << "edge_feedback = " << (edge_feedback ? 1 : 0) << "\n"
     << "prior_mu0 = " << exact(prior_mu0) << "\n"
     << "prior_sigma0 = " << exact(prior_sigma0) << "\n"
     << "out_variance = " << exact(out_variance) << "\n"
     << "val_horizon = " << val_horizon << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("train config: expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "beta_d") c.beta_d = parse_value<double>(key, v);
    else if (key == "beta_e") c.beta_e = parse_value<double>(key, v);
    else if (key == "cap_d") c.cap_d = parse_value<double>(key, v);
    else if (key == "cap_e") c.cap_e = parse_value<double>(key, v);
    else if (key == "lr") c.lr = parse_value<double>(key, v);
    else if (key == "epochs") c.epochs = parse_value<std::size_t>(key, v);
    else if (key == "batch_size") c.batch_size = parse_value<std::size_t>(key, v);
    else if (key == "shard_size") c.shard_size = parse_value<std::size_t>(key, v);
    else if (key == "seed") c.seed = parse_value<std::uint64_t>(key, v);
    else if (key == "t_obs") c.t_obs = parse_value<std::size_t>(key, v);
    else if (key == "mode") c.mode = train_mode_from_string(v);
    else if (key == "force_duration") c.force_duration = v == "none" ? std::nullopt : std::optional(parse_value<std::size_t>(key, v));
    else if (key == "tau") c.tau = parse_value<double>(key, v);
    else if (key == "edge_types") c.edge_types = parse_value<std::size_t>(key, v);
    else if (key == "hidden") c.hidden = parse_value<std::size_t>(key, v);
    else if (key == "edge_feedback") c.edge_feedback = parse_value<int>(key, v) != 0;
    else if (key == "prior_mu0") c.prior_mu0 = parse_value<double>(key, v);
    else if (key == "prior_sigma0") c.prior_sigma0 = parse_value<double>(key, v);
    else if (key == "out_variance") c.out_variance = parse_value<double>(key, v);
    else if (key == "val_horizon") c.val_horizon = parse_value<std::size_t>(key, v);
    else throw ConfigError("train config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

ElboReport elbo(const DiderModel& model, const std::vector<Tensor>& steps, std::size_t n_agents,
                const TrainConfig& config, Rng& rng, const std::vector<SegmentSchedule>* frozen) {
  const ShardTerms t = shard_terms(model, steps, n_agents, config, rng, frozen);
  const real inv_b = static_cast<real>(1.0 / static_cast<double>(steps.front().rows() / n_agents));
  const Tensor recon = scale(t.nll, inv_b);
  const Tensor kld = scale(t.kl_duration, inv_b);
  const Tensor kle = scale(t.kl_edge, inv_b);
  Tensor loss = recon;
  loss = add(loss, scale(abs(add_scalar(kld, static_cast<real>(-config.cap_d))), static_cast<real>(config.beta_d)));
  loss = add(loss, scale(abs(add_scalar(kle, static_cast<real>(-config.cap_e))), static_cast<real>(config.beta_e)));
  ElboReport r;
  r.recon_nll = recon.item();
  r.kl_duration = kld.item();
  r.kl_edge = kle.item();
  r.total_loss = loss.item();
  r.n_segments = t.edges ? t.segments / static_cast<double>(t.edges) : 0.0;
  r.loss = loss;
  return r;
}

// ---------------------------------------------------------------------------

Adam::Adam(const ParamStore& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : store.tensors()) {
    m_.emplace_back(p.numel(), real{0});
    v_.emplace_back(p.numel(), real{0});
  }
}

void Adam::step(ParamStore& store) {
  const auto params = store.tensors();
  if (params.size() != m_.size()) throw ContractError("Adam: parameter store changed shape");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    if (!p.has_grad()) continue;
    auto w = p.data();
    const auto g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<real>(beta1_ * m[i] + (1 - beta1_) * gi);
      v[i] = static_cast<real>(beta2_ * v[i] + (1 - beta2_) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<real>(w[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

// ---------------------------------------------------------------------------

std::string EpochMetrics::csv_header() { return "epoch,loss,recon_nll,kl_duration,kl_edge,n_segments,val_mse"; }

std::string EpochMetrics::csv_row() const {
  return std::to_string(epoch) + "," + exact(loss) + "," + exact(recon_nll) + "," + exact(kl_duration) + "," +
         exact(kl_edge) + "," + exact(n_segments) + "," + exact(val_mse);
}

TrainState::TrainState(const TrainConfig& cfg)
    : config(cfg), model(std::make_unique<DiderModel>(cfg.model_config())), rng(Rng(cfg.seed).fork(0x5348554646ULL)) {
  optimizer = Adam(model->params(), cfg.lr);
}

void save_checkpoint(const std::filesystem::path& path, TrainState& state) {
  std::vector<CheckpointEntry> entries;
  entries.push_back(CheckpointEntry::bytes("config", state.config.to_text()));
  const ParamStore& store = state.model->params();
  const auto& names = store.names();
  for (const auto& name : names) {
    const Tensor& p = store.get(name);
    entries.push_back(CheckpointEntry::floats("param/" + name, dims_of(p), to_f32(p.data())));
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Tensor& p = store.get(names[k]);
    entries.push_back(CheckpointEntry::floats("adam/m/" + names[k], dims_of(p), to_f32(state.optimizer.first_moments()[k])));
    entries.push_back(CheckpointEntry::floats("adam/v/" + names[k], dims_of(p), to_f32(state.optimizer.second_moments()[k])));
  }
  entries.push_back(CheckpointEntry::integers("adam/step", {state.optimizer.steps()}));
  entries.push_back(CheckpointEntry::integers(
      "train/state", {state.epochs_done, state.rng.seed(), state.rng.counter(), state.best_epoch,
                      std::bit_cast<std::uint64_t>(state.best_val)}));
  entries.push_back(CheckpointEntry::bytes("train/history", history_text(state.history)));
  write_checkpoint_file(path, entries);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const auto entries = read_checkpoint_file(path);
  TrainState state(TrainConfig::from_text(find_entry(entries, "config", EntryType::u8).text()));
  ParamStore& store = state.model->params();
  const auto& names = store.names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    Tensor p = store.get(names[k]);
    copy_into(p.data(), find_entry(entries, "param/" + names[k], EntryType::f32).f32, "param/" + names[k]);
    auto& m = state.optimizer.first_moments()[k];
    auto& v = state.optimizer.second_moments()[k];
    copy_into(m, find_entry(entries, "adam/m/" + names[k], EntryType::f32).f32, "adam/m/" + names[k]);
    copy_into(v, find_entry(entries, "adam/v/" + names[k], EntryType::f32).f32, "adam/v/" + names[k]);
  }
  const auto& step = find_entry(entries, "adam/step", EntryType::u64).u64;
  if (step.size() != 1) throw CorruptDataError("checkpoint entry 'adam/step' must hold one value");
  state.optimizer.set_steps(step[0]);
  const auto& st = find_entry(entries, "train/state", EntryType::u64).u64;
  if (st.size() != 5) throw CorruptDataError("checkpoint entry 'train/state' must hold five values");
  state.epochs_done = st[0];
  state.rng = Rng(st[1], st[2]);
  state.best_epoch = st[3];
  state.best_val = std::bit_cast<double>(st[4]);
  state.history = parse_history(find_entry(entries, "train/history", EntryType::u8).text());
  return state;
}

std::unique_ptr<DiderModel> load_model(const std::filesystem::path& path, TrainConfig* config) {
  TrainState state = load_checkpoint(path);
  if (config) *config = state.config;
  return std::move(state.model);
}

// ---------------------------------------------------------------------------

TrainResult train(const TrajectoryBatch& train_data, const TrajectoryBatch& val_data, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (train_data.n_samples == 0) throw ContractError("train: no training samples");
  if (train_data.horizon < config.t_obs + 1) {
    throw ContractError("train: horizon " + std::to_string(train_data.horizon) + " is shorter than burn-in + 1");
  }
  if (train_data.feature_dim != 4) throw DimensionError("train: expects four features per agent");
  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  const auto last_path = options.out_dir / "last.ckpt";
  const auto best_path = options.out_dir / "best.ckpt";
  const auto metrics_path = options.out_dir / "metrics.csv";

  TrainState state = options.resume ? load_checkpoint(last_path) : TrainState(config);
  if (options.resume && !(state.config == config)) {
    throw ConfigError("train: resume config differs from the checkpoint's config");
  }
  DiderModel& master = *state.model;
  const std::size_t n_agents = train_data.n_agents;
  const std::size_t n_shards = (config.batch_size + config.shard_size - 1) / config.shard_size;
  std::vector<std::unique_ptr<DiderModel>> replicas;
  for (std::size_t s = 0; s < n_shards; ++s) replicas.push_back(std::make_unique<DiderModel>(config.model_config()));
  const Rng base(config.seed);
  const auto force = config.effective_force_duration();
  const std::size_t val_h = val_data.n_samples ? config.validation_horizon(val_data.horizon) : 0;

  const std::size_t last_epoch = std::min(config.epochs, options.stop_after.value_or(config.epochs));
  for (std::size_t epoch = state.epochs_done + 1; epoch <= last_epoch; ++epoch) {
    std::vector<std::size_t> order(train_data.n_samples);
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, state.rng);

    double sum_loss = 0, sum_nll = 0, sum_kld = 0, sum_kle = 0, sum_seg = 0;
    const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      const std::size_t b0 = bi * config.batch_size;
      const std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
      const std::size_t bsize = b1 - b0;
      const std::size_t shards = (bsize + config.shard_size - 1) / config.shard_size;
      std::vector<GradTape> tapes(shards);
      std::vector<ShardTerms> terms(shards);
      for (std::size_t s = 0; s < shards; ++s) replicas[s]->params().copy_values_from(master.params());

      parallel_for(shards, options.threads, [&](std::size_t s) {
        const std::size_t s0 = b0 + s * config.shard_size;
        const std::size_t s1 = std::min(b1, s0 + config.shard_size);
        const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s0),
                                           order.begin() + static_cast<std::ptrdiff_t>(s1));
        TapeScope scope(&tapes[s]);
        Rng rng = base.fork(epoch).fork(bi).fork(s);
        terms[s] = shard_terms(*replicas[s], batch_steps(train_data, idx), n_agents, config, rng, nullptr);
      });

      double nll_sum = 0, kld_sum = 0, kle_sum = 0, seg_sum = 0;
      std::size_t edge_count = 0;
      for (std::size_t s = 0; s < shards; ++s) {
        const double v = terms[s].nll.item() + terms[s].kl_duration.item() + terms[s].kl_edge.item();
        if (!std::isfinite(v)) {
          const std::string op = tapes[s].first_non_finite();
          throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(bi) + "; first non-finite tensor produced by op '" +
                                (op.empty() ? std::string("unknown") : op) + "'");
        }
        nll_sum += terms[s].nll.item();
        kld_sum += terms[s].kl_duration.item();
        kle_sum += terms[s].kl_edge.item();
        seg_sum += terms[s].segments;
        edge_count += terms[s].edges;
      }
      const double inv_b = 1.0 / static_cast<double>(bsize);
      const double kld = kld_sum * inv_b, kle = kle_sum * inv_b;
      const double sd = config.beta_d * sign(kld - config.cap_d);
      const double se = config.beta_e * sign(kle - config.cap_e);

      parallel_for(shards, options.threads, [&](std::size_t s) {
        TapeScope scope(&tapes[s]);
        replicas[s]->params().zero_grad();
        Tensor loss = add(terms[s].nll, add(scale(terms[s].kl_duration, static_cast<real>(sd)),
                                            scale(terms[s].kl_edge, static_cast<real>(se))));
        loss = scale(loss, static_cast<real>(inv_b));
        if (loss.tracked()) tapes[s].backward(loss);
        tapes[s].clear();
      });

      master.params().zero_grad();
      for (std::size_t s = 0; s < shards; ++s) master.params().accumulate_grads_from(replicas[s]->params(), 1);
      for (const auto& name : master.params().names()) {
        for (real g : master.params().get(name).grad()) {
          if (!std::isfinite(g)) {
            throw DivergenceError("non-finite gradient in parameter '" + name + "' at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(bi));
          }
        }
      }
      state.optimizer.step(master.params());

      ElboReport report;
      report.recon_nll = nll_sum * inv_b;
      report.kl_duration = kld;
      report.kl_edge = kle;
      report.total_loss = report.recon_nll + config.beta_d * std::abs(kld - config.cap_d) +
                          config.beta_e * std::abs(kle - config.cap_e);
      report.n_segments = edge_count ? seg_sum / static_cast<double>(edge_count) : 0.0;
      if (options.on_batch) options.on_batch(epoch, bi, report);
      const double w = static_cast<double>(bsize);
      sum_loss += report.total_loss * w;
      sum_nll += report.recon_nll * w;
      sum_kld += report.kl_duration * w;
      sum_kle += report.kl_edge * w;
      sum_seg += report.n_segments * w;
    }

    EpochMetrics m;
    m.epoch = epoch;
    const double n = static_cast<double>(train_data.n_samples);
    m.loss = sum_loss / n;
    m.recon_nll = sum_nll / n;
    m.kl_duration = sum_kld / n;
    m.kl_edge = sum_kle / n;
    m.n_segments = sum_seg / n;
    m.val_mse = val_data.n_samples
                    ? free_running_mse(master, val_data, config.t_obs, val_h, force, options.val_chunk, options.threads)
                    : m.loss;
    if (!std::isfinite(m.val_mse)) {
      throw DivergenceError("validation error became non-finite at epoch " + std::to_string(epoch));
    }
    state.history.push_back(m);
    state.epochs_done = epoch;
    const bool improved = state.best_epoch == 0 || m.val_mse < state.best_val;
    if (improved) {
      state.best_val = m.val_mse;
      state.best_epoch = epoch;
    }
    if (write) {
      if (improved) save_checkpoint(best_path, state);
      save_checkpoint(last_path, state);
      std::ofstream out(metrics_path, std::ios::trunc);
      out << history_text(state.history);
      if (!out) throw std::runtime_error("failed writing " + metrics_path.string());
    }
    if (options.on_epoch) options.on_epoch(m);
  }

  TrainResult result;
  result.history = state.history;
  result.best_val = state.best_val;
  result.best_epoch = state.best_epoch;
  return result;
}

}  // namespace DIDER_ABI
}  // namespace dider
