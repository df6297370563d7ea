#pragma once

#include "dider/abi.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dider/rng.hpp"

namespace dider {
inline namespace DIDER_ABI {

/// How ground-truth interaction labels are attached to directed edges.
enum class LabelMode {
  /// Both i->pushed and pushed->i are labelled while in range.
  mutual,
  /// Only the edge whose receiver is the pushed particle.
  receiver,
};

std::string to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& text);

struct SimConfig {
  std::size_t n_agents = 3;
  std::size_t horizon = 50;
  std::size_t n_samples = 40000;
  double dt = 0.1;
  double interaction_radius = 1.0;
  double repulsion_strength = 1.0;
  std::array<double, 2> init_speed_range{0.1, 0.5};
  /// Initial positions are uniform in [-init_box, init_box]^2.
  double init_box = 2.0;
  /// Lower bound on squared separation inside the force law.
  double min_sq_distance = 0.01;
  LabelMode label_mode = LabelMode::mutual;
  std::uint64_t seed = 0;

  /// Throws ContractError on invalid values.
  void validate() const;
};

/// Affine map applied before storage: stored = (raw - offset) / scale for
/// positions, stored = raw / scale for velocities.
struct Normalization {
  std::array<double, 2> position_offset{0.0, 0.0};
  double scale = 1.0;

  bool is_identity() const { return position_offset[0] == 0.0 && position_offset[1] == 0.0 && scale == 1.0; }
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// States of N agents over T steps for S samples, feature layout (px, py, vx, vy).
struct TrajectoryBatch {
  std::size_t n_samples = 0;
  std::size_t horizon = 0;
  std::size_t n_agents = 0;
  std::size_t feature_dim = 4;
  std::size_t edge_types = 2;
  /// Row-major [S, T, N, feature_dim].
  std::vector<float> states;
  /// Row-major [S, T, N*(N-1)], values in [0, edge_types).
  std::optional<std::vector<std::uint8_t>> edge_labels;
  Normalization normalization;

  std::size_t n_edges() const { return n_agents * (n_agents - 1); }
  std::size_t state_index(std::size_t s, std::size_t t, std::size_t n, std::size_t f = 0) const {
    return ((s * horizon + t) * n_agents + n) * feature_dim + f;
  }
  std::size_t label_index(std::size_t s, std::size_t t, std::size_t e) const {
    return (s * horizon + t) * n_edges() + e;
  }
  /// Copy of samples [begin, end).
  TrajectoryBatch subset(std::size_t begin, std::size_t end) const;
  TrajectoryBatch select(const std::vector<std::size_t>& samples) const;

  friend bool operator==(const TrajectoryBatch&, const TrajectoryBatch&) = default;
};

/// Directed edge index for the ordered pair (src, dst), src != dst, in
/// lexicographic order over all ordered pairs.
std::size_t edge_index(std::size_t src, std::size_t dst, std::size_t n_agents);
std::pair<std::size_t, std::size_t> edge_endpoints(std::size_t edge, std::size_t n_agents);

struct AgentState {
  double px = 0, py = 0, vx = 0, vy = 0;
};

/// Integrates one episode from the given initial state. Agents 0..N-2 move
/// with constant velocity; agent N-1 is repelled by any agent closer than the
/// interaction radius. Output is a single-sample batch (raw coordinates).
TrajectoryBatch simulate_episode(const SimConfig& config, const std::vector<AgentState>& initial);

/// Generates config.n_samples episodes; sample s draws from rng.fork(s).
TrajectoryBatch simulate(const SimConfig& config, const Rng& rng);

/// Recentres positions and rescales positions and velocities by one common
/// scale (the position standard deviation), recording the map on the batch.
TrajectoryBatch normalize(const TrajectoryBatch& raw);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  TrajectoryBatch train;
  TrajectoryBatch val;
  TrajectoryBatch test;
};

/// Contiguous, order-preserving partition by sample index.
DatasetSplits split(const TrajectoryBatch& batch, const SplitFractions& fractions);

}  // namespace DIDER_ABI
}  // namespace dider
