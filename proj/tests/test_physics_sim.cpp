#include <doctest.h>

#include <cmath>

#include "dider/errors.hpp"
#include "dider/physics_sim.hpp"

using namespace dider;

namespace {

SimConfig small_config(std::size_t samples, std::uint64_t seed = 1) {
  SimConfig c;
  c.n_samples = samples;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("edge indexing is lexicographic over ordered pairs") {
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      CHECK(edge_index(i, j, 4) == expected);
      CHECK(edge_endpoints(expected, 4) == std::pair{i, j});
      ++expected;
    }
  }
  CHECK_THROWS_AS(edge_index(1, 1, 3), ContractError);
}

TEST_CASE("far apart particles never interact") {
  SimConfig c = small_config(1);
  std::vector<AgentState> init{{-10, 0, 0, 0.2}, {10, 0, 0, -0.2}, {0, 10, 0.3, 0}};
  const TrajectoryBatch b = simulate_episode(c, init);
  for (auto l : *b.edge_labels) CHECK(l == 0);
  for (std::size_t t = 0; t < c.horizon; ++t) {
    CHECK(b.states[b.state_index(0, t, 2, 2)] == 0.3f);
    CHECK(b.states[b.state_index(0, t, 2, 3)] == 0.0f);
  }
}

TEST_CASE("close particle triggers the label at t = 0") {
  SimConfig c = small_config(1);
  std::vector<AgentState> init{{0, 0, 0, 0}, {5, 5, 0, 0}, {0.5, 0, 0, 0}};
  const TrajectoryBatch b = simulate_episode(c, init);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(0, 2, 3))] == 1);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(2, 0, 3))] == 1);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(1, 2, 3))] == 0);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(0, 1, 3))] == 0);
  // Pushed away from particle 0 along +x.
  CHECK(b.states[b.state_index(0, 1, 2, 2)] > 0);
  CHECK(b.states[b.state_index(0, 1, 2, 3)] == 0);
}

TEST_CASE("receiver label mode marks only the edge into the pushed particle") {
  SimConfig c = small_config(1);
  c.label_mode = LabelMode::receiver;
  std::vector<AgentState> init{{0, 0, 0, 0}, {5, 5, 0, 0}, {0.5, 0, 0, 0}};
  const TrajectoryBatch b = simulate_episode(c, init);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(0, 2, 3))] == 1);
  CHECK((*b.edge_labels)[b.label_index(0, 0, edge_index(2, 0, 3))] == 0);
}

TEST_CASE("generated labels agree with recomputed distances") {
  const SimConfig c = small_config(300, 11);
  const TrajectoryBatch b = simulate(c, Rng(c.seed));
  std::size_t positives = 0;
  for (std::size_t s = 0; s < b.n_samples; ++s) {
    for (std::size_t t = 0; t < b.horizon; ++t) {
      for (std::size_t e = 0; e < b.n_edges(); ++e) {
        const auto [i, j] = edge_endpoints(e, 3);
        const std::uint8_t label = (*b.edge_labels)[b.label_index(s, t, e)];
        if (i != 2 && j != 2) {
          CHECK(label == 0);
          continue;
        }
        const std::size_t other = i == 2 ? j : i;
        const double dx = static_cast<double>(b.states[b.state_index(s, t, 2, 0)]) - b.states[b.state_index(s, t, other, 0)];
        const double dy = static_cast<double>(b.states[b.state_index(s, t, 2, 1)]) - b.states[b.state_index(s, t, other, 1)];
        const bool close = std::sqrt(dx * dx + dy * dy) < c.interaction_radius;
        CHECK(label == (close ? 1 : 0));
        positives += close;
      }
    }
  }
  CHECK(positives > 0);
}

TEST_CASE("constant velocity agents do not drift and positions follow velocities") {
  const SimConfig c = small_config(50, 3);
  const TrajectoryBatch b = simulate(c, Rng(c.seed));
  for (std::size_t s = 0; s < b.n_samples; ++s) {
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t t = 0; t < b.horizon; ++t) {
        CHECK(b.states[b.state_index(s, t, n, 2)] == b.states[b.state_index(s, 0, n, 2)]);
        CHECK(b.states[b.state_index(s, t, n, 3)] == b.states[b.state_index(s, 0, n, 3)]);
      }
    }
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t t = 0; t + 1 < b.horizon; ++t) {
        for (std::size_t f = 0; f < 2; ++f) {
          const double step = b.states[b.state_index(s, t + 1, n, f)] - b.states[b.state_index(s, t, n, f)];
          // Positions are stored in f32, so differences carry roughly one ulp of error.
          CHECK(std::abs(step - c.dt * b.states[b.state_index(s, t, n, f + 2)]) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("initial speeds fall in the configured range") {
  const SimConfig c = small_config(200, 5);
  const TrajectoryBatch b = simulate(c, Rng(c.seed));
  for (std::size_t s = 0; s < b.n_samples; ++s) {
    for (std::size_t n = 0; n < 3; ++n) {
      const double vx = b.states[b.state_index(s, 0, n, 2)];
      const double vy = b.states[b.state_index(s, 0, n, 3)];
      const double speed = std::sqrt(vx * vx + vy * vy);
      CHECK(speed >= c.init_speed_range[0] - 1e-6);
      CHECK(speed <= c.init_speed_range[1] + 1e-6);
    }
  }
}

TEST_CASE("same seed gives a bit-identical batch, different seeds differ") {
  const SimConfig c = small_config(20, 9);
  CHECK(simulate(c, Rng(9)) == simulate(c, Rng(9)));
  CHECK_FALSE(simulate(c, Rng(9)).states == simulate(c, Rng(10)).states);
}

TEST_CASE("normalize records an invertible map") {
  const SimConfig c = small_config(40, 2);
  const TrajectoryBatch raw = simulate(c, Rng(2));
  const TrajectoryBatch norm = normalize(raw);
  CHECK_FALSE(norm.normalization.is_identity());
  double mx = 0, var = 0;
  const std::size_t rows = norm.states.size() / 4;
  for (std::size_t r = 0; r < rows; ++r) mx += norm.states[r * 4];
  CHECK(std::abs(mx / rows) < 1e-4);
  for (std::size_t r = 0; r < rows; ++r) {
    var += norm.states[r * 4] * norm.states[r * 4] + norm.states[r * 4 + 1] * norm.states[r * 4 + 1];
  }
  CHECK(var / (2.0 * rows) == doctest::Approx(1.0).epsilon(1e-3));
  const auto& m = norm.normalization;
  for (std::size_t r = 0; r < rows; r += 97) {
    CHECK(norm.states[r * 4] * m.scale + m.position_offset[0] == doctest::Approx(raw.states[r * 4]).epsilon(1e-4));
    CHECK(norm.states[r * 4 + 2] * m.scale == doctest::Approx(raw.states[r * 4 + 2]).epsilon(1e-4));
  }
  CHECK(*norm.edge_labels == *raw.edge_labels);
  CHECK_THROWS_AS(normalize(norm), ContractError);
}

TEST_CASE("split sizes and order") {
  const TrajectoryBatch b = simulate(small_config(10, 1), Rng(1));
  const DatasetSplits s = split(b, {0.8, 0.1, 0.1});
  CHECK(s.train.n_samples == 8);
  CHECK(s.val.n_samples == 1);
  CHECK(s.test.n_samples == 1);
  CHECK(s.test.states == b.subset(9, 10).states);
  const DatasetSplits all = split(b, {1, 0, 0});
  CHECK(all.train == b);
  CHECK(all.val.n_samples == 0);
  CHECK_THROWS_AS(split(b, {1.2, -0.1, -0.1}), ContractError);
}

TEST_CASE("invalid configurations are rejected") {
  SimConfig c;
  c.n_agents = 1;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = SimConfig{};
  c.dt = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  CHECK(SimConfig{}.n_samples == 40000);
  CHECK(SimConfig{}.horizon == 50);
  CHECK(SimConfig{}.n_agents == 3);
}
