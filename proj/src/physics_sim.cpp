#include "dider/physics_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

std::string to_string(LabelMode mode) { return mode == LabelMode::mutual ? "mutual" : "receiver"; }

LabelMode label_mode_from_string(const std::string& text) {
  if (text == "mutual") return LabelMode::mutual;
  if (text == "receiver") return LabelMode::receiver;
  throw ConfigError("unknown label mode '" + text + "' (expected mutual|receiver)");
}

void SimConfig::validate() const {
  if (horizon < 2) throw ContractError("SimConfig: horizon must be >= 2");
  if (n_agents < 2) throw ContractError("SimConfig: n_agents must be >= 2");
  if (n_agents > 255) throw ContractError("SimConfig: n_agents must be <= 255");
  if (!(interaction_radius > 0)) throw ContractError("SimConfig: interaction_radius must be > 0");
  if (!(dt > 0)) throw ContractError("SimConfig: dt must be > 0");
  if (init_speed_range[0] < 0 || init_speed_range[1] < init_speed_range[0]) {
    throw ContractError("SimConfig: init_speed_range must satisfy 0 <= min <= max");
  }
  if (!(init_box > 0)) throw ContractError("SimConfig: init_box must be > 0");
  if (repulsion_strength < 0) throw ContractError("SimConfig: repulsion_strength must be >= 0");
}

std::size_t edge_index(std::size_t src, std::size_t dst, std::size_t n_agents) {
  if (src == dst || src >= n_agents || dst >= n_agents) throw ContractError("edge_index: invalid pair");
  return src * (n_agents - 1) + (dst < src ? dst : dst - 1);
}

std::pair<std::size_t, std::size_t> edge_endpoints(std::size_t edge, std::size_t n_agents) {
  const std::size_t src = edge / (n_agents - 1);
  const std::size_t k = edge % (n_agents - 1);
  return {src, k < src ? k : k + 1};
}

TrajectoryBatch TrajectoryBatch::subset(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> idx;
  for (std::size_t s = begin; s < end; ++s) idx.push_back(s);
  return select(idx);
}

TrajectoryBatch TrajectoryBatch::select(const std::vector<std::size_t>& samples) const {
  TrajectoryBatch out = *this;
  out.n_samples = samples.size();
  const std::size_t per_state = horizon * n_agents * feature_dim;
  const std::size_t per_label = horizon * n_edges();
  out.states.clear();
  out.states.reserve(samples.size() * per_state);
  for (std::size_t s : samples) {
    if (s >= n_samples) throw ContractError("TrajectoryBatch::select: sample index out of range");
    out.states.insert(out.states.end(), states.begin() + static_cast<std::ptrdiff_t>(s * per_state),
                      states.begin() + static_cast<std::ptrdiff_t>((s + 1) * per_state));
  }
  if (edge_labels) {
    std::vector<std::uint8_t> labels;
    labels.reserve(samples.size() * per_label);
    for (std::size_t s : samples) {
      labels.insert(labels.end(), edge_labels->begin() + static_cast<std::ptrdiff_t>(s * per_label),
                    edge_labels->begin() + static_cast<std::ptrdiff_t>((s + 1) * per_label));
    }
    out.edge_labels = std::move(labels);
  }
  return out;
}

TrajectoryBatch simulate_episode(const SimConfig& config, const std::vector<AgentState>& initial) {
  config.validate();
  const std::size_t n = config.n_agents;
  if (initial.size() != n) throw ContractError("simulate_episode: need one initial state per agent");
  const std::size_t pushed = n - 1;
  const double r2 = config.interaction_radius * config.interaction_radius;

  TrajectoryBatch out;
  out.n_samples = 1;
  out.horizon = config.horizon;
  out.n_agents = n;
  out.states.assign(config.horizon * n * 4, 0.0f);
  std::vector<std::uint8_t> labels(config.horizon * out.n_edges(), 0);

  std::vector<AgentState> cur = initial;
  for (std::size_t t = 0; t < config.horizon; ++t) {
    std::array<float, 2> stored_pushed{};
    for (std::size_t i = 0; i < n; ++i) {
      float* row = &out.states[out.state_index(0, t, i)];
      row[0] = static_cast<float>(cur[i].px);
      row[1] = static_cast<float>(cur[i].py);
      row[2] = static_cast<float>(cur[i].vx);
      row[3] = static_cast<float>(cur[i].vy);
      if (i == pushed) stored_pushed = {row[0], row[1]};
    }
    double ax = 0, ay = 0;
    for (std::size_t i = 0; i < pushed; ++i) {
      // Label decided on the stored coordinates so that it can be recomputed exactly.
      const float* row = &out.states[out.state_index(0, t, i)];
      const double sx = static_cast<double>(stored_pushed[0]) - row[0];
      const double sy = static_cast<double>(stored_pushed[1]) - row[1];
      if (sx * sx + sy * sy < r2) {
        labels[out.label_index(0, t, edge_index(i, pushed, n))] = 1;
        if (config.label_mode == LabelMode::mutual) labels[out.label_index(0, t, edge_index(pushed, i, n))] = 1;
        const double dx = cur[pushed].px - cur[i].px;
        const double dy = cur[pushed].py - cur[i].py;
        const double d2 = std::max(dx * dx + dy * dy, config.min_sq_distance);
        ax += config.repulsion_strength * dx / d2;
        ay += config.repulsion_strength * dy / d2;
      }
    }
    for (auto& a : cur) {
      a.px += config.dt * a.vx;
      a.py += config.dt * a.vy;
    }
    cur[pushed].vx += config.dt * ax;
    cur[pushed].vy += config.dt * ay;
  }
  out.edge_labels = std::move(labels);
  return out;
}

TrajectoryBatch simulate(const SimConfig& config, const Rng& rng) {
  config.validate();
  TrajectoryBatch out;
  out.n_samples = config.n_samples;
  out.horizon = config.horizon;
  out.n_agents = config.n_agents;
  const std::size_t per_state = config.horizon * config.n_agents * 4;
  const std::size_t per_label = config.horizon * out.n_edges();
  out.states.resize(config.n_samples * per_state);
  std::vector<std::uint8_t> labels(config.n_samples * per_label);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    Rng local = rng.fork(s);
    std::vector<AgentState> init(config.n_agents);
    for (auto& a : init) {
      a.px = local.uniform(-config.init_box, config.init_box);
      a.py = local.uniform(-config.init_box, config.init_box);
      const double speed = local.uniform(config.init_speed_range[0], config.init_speed_range[1]);
      const double heading = local.uniform(0.0, 2.0 * std::numbers::pi);
      a.vx = speed * std::cos(heading);
      a.vy = speed * std::sin(heading);
    }
    TrajectoryBatch one = simulate_episode(config, init);
    std::copy(one.states.begin(), one.states.end(), out.states.begin() + static_cast<std::ptrdiff_t>(s * per_state));
    std::copy(one.edge_labels->begin(), one.edge_labels->end(),
              labels.begin() + static_cast<std::ptrdiff_t>(s * per_label));
  }
  out.edge_labels = std::move(labels);
  return out;
}

TrajectoryBatch normalize(const TrajectoryBatch& raw) {
  if (!raw.normalization.is_identity()) throw ContractError("normalize: batch is already normalized");
  if (raw.feature_dim != 4) throw ContractError("normalize: expects (px, py, vx, vy) features");
  const std::size_t rows = raw.states.size() / 4;
  if (rows == 0) return raw;
  double mx = 0, my = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    mx += raw.states[r * 4];
    my += raw.states[r * 4 + 1];
  }
  mx /= static_cast<double>(rows);
  my /= static_cast<double>(rows);
  double var = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double dx = raw.states[r * 4] - mx;
    const double dy = raw.states[r * 4 + 1] - my;
    var += dx * dx + dy * dy;
  }
  var /= static_cast<double>(2 * rows);
  const double scale = var > 0 ? std::sqrt(var) : 1.0;

  TrajectoryBatch out = raw;
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = &out.states[r * 4];
    row[0] = static_cast<float>((row[0] - mx) / scale);
    row[1] = static_cast<float>((row[1] - my) / scale);
    row[2] = static_cast<float>(row[2] / scale);
    row[3] = static_cast<float>(row[3] / scale);
  }
  out.normalization = {{mx, my}, scale};
  return out;
}

DatasetSplits split(const TrajectoryBatch& batch, const SplitFractions& f) {
  for (double v : {f.train, f.val, f.test}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("split: fractions must lie in [0, 1]");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-6) throw ContractError("split: fractions must sum to 1");
  const auto count = [&](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(batch.n_samples) + 1e-9));
  };
  const std::size_t n_train = std::min(count(f.train), batch.n_samples);
  const std::size_t n_val = std::min(count(f.val), batch.n_samples - n_train);
  return {batch.subset(0, n_train), batch.subset(n_train, n_train + n_val),
          batch.subset(n_train + n_val, batch.n_samples)};
}

}  // namespace DIDER_ABI
}  // namespace dider
