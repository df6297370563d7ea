#include "dider/model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "dider/errors.hpp"

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
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) throw ConfigError("model config: bad value for '" + key + "': '" + value + "'");
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("model config: feature_dim must be > 0");
  if (hidden == 0 || decoder_hidden == 0) throw ConfigError("model config: hidden widths must be > 0");
  if (edge_types < 2) throw ConfigError("model config: edge_types must be >= 2");
  if (!(tau > 0)) throw ConfigError("model config: tau must be > 0");
  if (!(prior_sigma0 > 0)) throw ConfigError("model config: prior_sigma0 must be > 0");
  if (d_min < 1) throw ConfigError("model config: d_min must be >= 1");
  if (!(out_variance > 0)) throw ConfigError("model config: out_variance must be > 0");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "feature_dim = " << feature_dim << '\n'
     << "hidden = " << hidden << '\n'
     << "decoder_hidden = " << decoder_hidden << '\n'
     << "edge_types = " << edge_types << '\n'
     << "tau = " << tau << '\n'
     << "duration_variant = " << to_string(duration_variant) << '\n'
     << "edge_feedback = " << (edge_feedback ? 1 : 0) << '\n'
     << "prior_mu0 = " << prior_mu0 << '\n'
     << "prior_sigma0 = " << prior_sigma0 << '\n'
     << "d_min = " << d_min << '\n'
     << "out_variance = " << out_variance << '\n'
     << "init_seed = " << init_seed << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("model config: expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "feature_dim") c.feature_dim = parse_number<std::size_t>(key, value);
    else if (key == "hidden") c.hidden = parse_number<std::size_t>(key, value);
    else if (key == "decoder_hidden") c.decoder_hidden = parse_number<std::size_t>(key, value);
    else if (key == "edge_types") c.edge_types = parse_number<std::size_t>(key, value);
    else if (key == "tau") c.tau = parse_number<double>(key, value);
    else if (key == "duration_variant") c.duration_variant = duration_variant_from_string(value);
    else if (key == "edge_feedback") c.edge_feedback = parse_number<int>(key, value) != 0;
    else if (key == "prior_mu0") c.prior_mu0 = parse_number<double>(key, value);
    else if (key == "prior_sigma0") c.prior_sigma0 = parse_number<double>(key, value);
    else if (key == "d_min") c.d_min = parse_number<std::size_t>(key, value);
    else if (key == "out_variance") c.out_variance = parse_number<double>(key, value);
    else if (key == "init_seed") c.init_seed = parse_number<std::uint64_t>(key, value);
    else throw ConfigError("model config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

DiderModel::DiderModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed);
  const std::size_t h = config_.hidden;
  const std::size_t feedback = config_.edge_feedback ? config_.edge_types : 0;
  encoder_ = EncoderParams::create(store_, config_.feature_dim, h, feedback, rng);
  const std::size_t duration_in = config_.duration_variant == DurationVariant::full_trajectory ? 2 * h : h;
  duration_ = DurationParams::create(store_, duration_in, h, config_.prior_mu0, config_.prior_sigma0, config_.d_min, rng);
  edges_ = EdgeInfParams::create(store_, h, config_.edge_types, config_.tau, rng);
  decoder_ = DecoderParams::create(store_, config_.feature_dim, config_.decoder_hidden, config_.edge_types,
                                   config_.out_variance, rng);
}

RunOutput DiderModel::run(const std::vector<Tensor>& steps, std::size_t n_agents, const RunOptions& opt,
                          Rng& rng) const {
  const std::size_t horizon = steps.size();
  if (horizon < 2) throw ContractError("run: need at least two steps");
  if (opt.t_obs < 1 || opt.t_obs >= horizon) {
    throw ContractError("run: burn-in " + std::to_string(opt.t_obs) + " must lie in [1, " +
                        std::to_string(horizon - 1) + "]");
  }
  if (n_agents < 2) throw ContractError("run: need at least two agents");
  if (steps.front().rows() % n_agents != 0) throw DimensionError("run: state rows are not a multiple of n_agents");
  const std::size_t n_samples = steps.front().rows() / n_agents;
  const GraphIndex graph = GraphIndex::fully_connected(n_agents, n_samples);
  const std::size_t n_edges = graph.edges_per_graph();
  const std::size_t edge_rows = graph.edge_rows();
  const std::size_t e_types = config_.edge_types;
  const bool teacher = opt.rollout == RolloutMode::teacher_forced;
  const bool use_encoder = opt.edge_source == EdgeSource::encoder;
  const bool want_edge_kl = use_encoder || opt.compute_kl;
  const bool duration_free = !opt.force_duration.has_value();
  const bool full_duration = config_.duration_variant == DurationVariant::full_trajectory;
  const bool need_reverse = want_edge_kl || (duration_free && full_duration);
  if (opt.force_duration && *opt.force_duration < 1) throw ContractError("run: forced duration must be >= 1");
  if (opt.frozen_durations && opt.frozen_durations->size() != n_samples) {
    throw ContractError("run: frozen schedules must cover every sample");
  }

  // Ground-truth embeddings for all steps at once; the reverse recurrence always
  // reads ground truth (it is only available offline).
  std::vector<Tensor> gt_emb;
  if (teacher || need_reverse) {
    const GraphIndex stacked = GraphIndex::fully_connected(n_agents, n_samples * horizon);
    const Tensor all = embed_step(encoder_, stack_rows(steps), stacked);
    gt_emb.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) gt_emb.push_back(slice_rows(all, t * edge_rows, (t + 1) * edge_rows));
  }
  std::vector<Tensor> h_reverse;
  if (need_reverse) h_reverse = roll_reverse(encoder_, gt_emb);

  RunOutput out;
  out.n_samples = n_samples;
  out.horizon = horizon;
  out.n_edges = n_edges;
  out.kl_duration = Tensor::scalar(0);
  out.kl_edge = Tensor::scalar(0);
  out.decoder_edge_types.assign(n_samples * (horizon - 1) * n_edges, 0);
  out.predictions.resize(horizon - 1);

  ScheduleBuilder builder(edge_rows, opt.t_obs, horizon, config_.d_min);
  LstmState prior_state = encoder_.forward_cell.zero_state(edge_rows);
  LstmState dec_state = decoder_.cell.zero_state(graph.node_rows());
  Tensor current;  // [edge_rows, e]: sample of the segment covering the next target

  const auto record_types = [&](std::size_t target) {
    auto d = current.data();
    for (std::size_t r = 0; r < edge_rows; ++r) {
      const auto first = d.begin() + static_cast<std::ptrdiff_t>(r * e_types);
      const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(e_types)) - first;
      const std::size_t b = r / n_edges, e = r % n_edges;
      out.decoder_edge_types[((b * (horizon - 1)) + (target - 1)) * n_edges + e] = static_cast<std::uint8_t>(best);
    }
  };
  const auto decode_input = [&](std::size_t t, const Tensor& x) {
    DecodeResult r = decode_step(decoder_, x, dec_state, current, graph);
    dec_state = r.state;
    out.predictions[t] = r.prediction;
    record_types(t + 1);
  };

  for (std::size_t t = 0; t + 1 < horizon; ++t) {
    const bool truth_input = teacher || t < opt.t_obs;
    const Tensor& x_t = truth_input ? steps[t] : out.predictions[t - 1];
    const Tensor emb = truth_input && !gt_emb.empty() ? gt_emb[t] : embed_step(encoder_, x_t, graph);
    Tensor cell_in = emb;
    if (config_.edge_feedback) {
      const Tensor feedback = t >= opt.t_obs ? current : Tensor::zeros({edge_rows, e_types});
      cell_in = concat_cols({emb, feedback});
    }
    prior_state = encoder_.forward_cell(cell_in, prior_state);

    const std::vector<std::size_t> active = builder.reading_at(t);
    if (!active.empty()) {
      const Tensor hp = gather_rows(prior_state.h, active);
      Tensor hr;
      if (need_reverse) hr = gather_rows(h_reverse[t], active);

      std::vector<double> z(active.size()), mu(active.size()), sigma(active.size());
      if (duration_free) {
        const Tensor h_dur = full_duration ? concat_cols({hr, hp}) : hp;
        const DurationPosterior post = duration_posterior(duration_, h_dur);
        out.kl_duration = add(out.kl_duration, duration_kl(post.mu, post.sigma, duration_.prior_mu0, duration_.prior_sigma0));
        for (std::size_t i = 0; i < active.size(); ++i) {
          mu[i] = post.mu.at(i);
          sigma[i] = post.sigma.at(i);
          z[i] = opt.sample_durations ? mu[i] + sigma[i] * rng.normal() : mu[i];
        }
      }

      const Tensor prior = prior_logits(edges_, hp);
      Tensor source = prior;
      if (want_edge_kl) {
        const Tensor enc = encoder_logits(edges_, hr, hp);
        out.kl_edge = add(out.kl_edge, edge_kl(enc, prior));
        if (use_encoder) source = enc;
      }
      const Tensor sample = sample_edges(rng, source, config_.tau, opt.edge_mode);
      current = current.defined() ? replace_rows(current, active, sample) : sample;
      if (current.rows() != edge_rows) throw ContractError("run: first read must cover every edge");

      for (std::size_t i = 0; i < active.size(); ++i) {
        const std::size_t row = active[i];
        Segment seg;
        seg.t_start = builder.next_start(row);
        const std::size_t k = builder.segments()[row].size();
        if (opt.frozen_durations) {
          const auto& frozen = (*opt.frozen_durations)[row / n_edges].edges.at(row % n_edges).at(k);
          seg.duration = frozen.duration;
          z[i] = frozen.z_d;
        } else if (opt.force_duration) {
          seg.duration = std::min(*opt.force_duration, builder.remaining(row));
          z[i] = static_cast<double>(seg.duration) / static_cast<double>(builder.remaining(row));
        } else {
          seg.duration = realize_duration(z[i], builder.remaining(row), config_.d_min);
        }
        seg.z_d = z[i];
        seg.mu = mu[i];
        seg.sigma = sigma[i];
        const auto sd = sample.data();
        const auto first = sd.begin() + static_cast<std::ptrdiff_t>(i * e_types);
        seg.edge_type = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(e_types)) - first);
        builder.commit(row, seg);
      }
    }

    if (t + 1 == opt.t_obs) {
      for (std::size_t u = 0; u < t; ++u) decode_input(u, steps[u]);
    }
    if (t + 1 >= opt.t_obs) decode_input(t, x_t);
  }

  if (!builder.complete()) throw ContractError("run: schedule does not reach the horizon");
  out.schedules = builder.per_graph(n_edges);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Tensor> batch_steps(const TrajectoryBatch& batch, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> samples;
  for (std::size_t s = begin; s < end; ++s) samples.push_back(s);
  return batch_steps(batch, samples);
}

std::vector<Tensor> batch_steps(const TrajectoryBatch& batch, const std::vector<std::size_t>& samples) {
  const std::size_t n = batch.n_agents, f = batch.feature_dim;
  std::vector<Tensor> steps;
  steps.reserve(batch.horizon);
  for (std::size_t t = 0; t < batch.horizon; ++t) {
    std::vector<real> values(samples.size() * n * f);
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const float* src = &batch.states[batch.state_index(samples[b], t, 0)];
      std::copy(src, src + n * f, values.begin() + static_cast<std::ptrdiff_t>(b * n * f));
    }
    steps.push_back(Tensor::from({samples.size() * n, f}, std::move(values)));
  }
  return steps;
}

Tensor stack_rows(const std::vector<Tensor>& parts) { return concat_rows(parts); }

}  // namespace DIDER_ABI
}  // namespace dider
