#include <doctest.h>

#include <cmath>
#include <limits>

#include "dider/decoder.hpp"
#include "dider/errors.hpp"
#include "dider/physics_sim.hpp"

using namespace dider;

namespace {

struct Fixture {
  ParamStore store;
  DecoderParams params;
  explicit Fixture(std::size_t types = 2, std::uint64_t seed = 1) {
    Rng rng(seed);
    params = DecoderParams::create(store, 4, 16, types, 5e-5, rng);
  }
};

Tensor random_states(std::size_t rows, Rng& rng) {
  std::vector<real> v(rows * 4);
  for (auto& x : v) x = static_cast<real>(rng.uniform(-2, 2));
  return Tensor::from({rows, 4}, v);
}

Tensor constant_edges(std::size_t rows, std::size_t types, std::size_t type) {
  std::vector<real> v(rows * types, 0);
  for (std::size_t r = 0; r < rows; ++r) v[r * types + type] = 1;
  return Tensor::from({rows, types}, v);
}

std::vector<real> row(const Tensor& t, std::size_t r) {
  const auto d = t.data();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * t.cols()), d.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())};
}

}  // namespace

TEST_CASE("type 0 edges carry no messages") {
  Fixture f;
  Rng rng(2);
  const auto graph = GraphIndex::fully_connected(3, 1);
  const Tensor x = random_states(3, rng);
  const auto state = f.params.cell.zero_state(3);
  const auto none = constant_edges(6, 2, 0);
  const Tensor a = decode_step(f.params, x, state, none, graph).prediction;
  // Perturb agent 0: with no interactions, agents 1 and 2 are unaffected.
  std::vector<real> v(x.data().begin(), x.data().end());
  v[0] += 0.5f;
  v[3] -= 0.25f;
  const Tensor b = decode_step(f.params, Tensor::from({3, 4}, v), state, none, graph).prediction;
  CHECK(row(a, 1) == row(b, 1));
  CHECK(row(a, 2) == row(b, 2));
  CHECK_FALSE(row(a, 0) == row(b, 0));
  // With interactions the perturbation propagates.
  const auto all = constant_edges(6, 2, 1);
  const Tensor c = decode_step(f.params, x, state, all, graph).prediction;
  const Tensor d = decode_step(f.params, Tensor::from({3, 4}, v), state, all, graph).prediction;
  CHECK_FALSE(row(c, 1) == row(d, 1));
}

TEST_CASE("dropping one edge to type 0 removes exactly its contribution") {
  Fixture f(3);
  Rng rng(3);
  const auto graph = GraphIndex::fully_connected(3, 1);
  const Tensor x = random_states(3, rng);
  const auto state = f.params.cell.zero_state(3);
  std::vector<real> e(6 * 3, 0);
  for (std::size_t r = 0; r < 6; ++r) e[r * 3 + 1 + r % 2] = 1;
  const Tensor full = decode_step(f.params, x, state, Tensor::from({6, 3}, e), graph).prediction;
  // Silence edge 1 -> 0 (receiver 0); agents 1 and 2 keep their predictions.
  const std::size_t cut = edge_index(1, 0, 3);
  e[cut * 3 + 1] = e[cut * 3 + 2] = 0;
  e[cut * 3] = 1;
  const Tensor less = decode_step(f.params, x, state, Tensor::from({6, 3}, e), graph).prediction;
  CHECK(row(full, 1) == row(less, 1));
  CHECK(row(full, 2) == row(less, 2));
  CHECK_FALSE(row(full, 0) == row(less, 0));
}

TEST_CASE("zero output weights predict no change") {
  Fixture f;
  for (auto t : {f.params.out.first.weight, f.params.out.first.bias, f.params.out.second.weight,
                 f.params.out.second.bias}) {
    std::ranges::fill(t.data(), real{0});
  }
  Rng rng(4);
  const auto graph = GraphIndex::fully_connected(3, 2);
  const Tensor x = random_states(6, rng);
  const Tensor y = decode_step(f.params, x, f.params.cell.zero_state(6), constant_edges(12, 2, 1), graph).prediction;
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("zero-delta teacher forced MSE equals the mean squared displacement") {
  Fixture f;
  for (auto t : {f.params.out.second.weight, f.params.out.second.bias}) std::ranges::fill(t.data(), real{0});
  SimConfig c;
  c.n_samples = 4;
  c.horizon = 10;
  const TrajectoryBatch data = normalize(simulate(c, Rng(5)));
  const std::size_t rows = data.n_samples * data.n_agents;
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < data.horizon; ++t) {
    std::vector<real> v;
    for (std::size_t s = 0; s < data.n_samples; ++s) {
      for (std::size_t n = 0; n < data.n_agents; ++n) {
        for (std::size_t k = 0; k < 4; ++k) v.push_back(data.states[data.state_index(s, t, n, k)]);
      }
    }
    steps.push_back(Tensor::from({rows, 4}, v));
  }
  const auto graph = GraphIndex::fully_connected(3, data.n_samples);
  const std::vector<Tensor> edges(data.horizon - 1, constant_edges(graph.edge_rows(), 2, 1));
  const auto pred = rollout(f.params, steps, edges, 5, RolloutMode::teacher_forced, graph);
  double mse = 0, oracle = 0;
  std::size_t count = 0;
  for (std::size_t t = 0; t + 1 < data.horizon; ++t) {
    for (std::size_t s = 0; s < data.n_samples; ++s) {
      for (std::size_t n = 0; n < data.n_agents; ++n) {
        for (std::size_t k = 0; k < 4; ++k) {
          const double truth = data.states[data.state_index(s, t + 1, n, k)];
          const double prev = data.states[data.state_index(s, t, n, k)];
          mse += std::pow(pred[t].at(s * 3 + n, k) - truth, 2);
          oracle += std::pow(truth - prev, 2);
          ++count;
        }
      }
    }
  }
  CHECK(mse / count == doctest::Approx(oracle / count).epsilon(1e-6));
}

TEST_CASE("a single agent has no edges") {
  Fixture f;
  Rng rng(6);
  const auto graph = GraphIndex::fully_connected(1, 2);
  CHECK(graph.edge_rows() == 0);
  const auto r = decode_step(f.params, random_states(2, rng), f.params.cell.zero_state(2), Tensor::zeros({0, 2}), graph);
  CHECK(r.prediction.shape() == Shape{2, 4});
  for (real v : r.prediction.data()) CHECK(std::isfinite(v));
}

TEST_CASE("free running never reads ground truth after burn-in") {
  Fixture f;
  Rng rng(7);
  const auto graph = GraphIndex::fully_connected(3, 1);
  const std::size_t horizon = 12, t_obs = 5;
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < horizon; ++t) steps.push_back(random_states(3, rng));
  std::vector<Tensor> poisoned = steps;
  for (std::size_t t = t_obs; t < horizon; ++t) {
    poisoned[t] = Tensor::full({3, 4}, std::numeric_limits<real>::quiet_NaN());
  }
  const std::vector<Tensor> edges(horizon - 1, constant_edges(6, 2, 1));
  const auto a = rollout(f.params, steps, edges, t_obs, RolloutMode::free_running, graph);
  const auto b = rollout(f.params, poisoned, edges, t_obs, RolloutMode::free_running, graph);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].numel(); ++i) {
      CHECK(std::isfinite(b[k].at(i)));
      CHECK(a[k].at(i) == b[k].at(i));
    }
  }
  // The first free-running prediction consumes the last burn-in state.
  const auto tf = rollout(f.params, steps, edges, t_obs, RolloutMode::teacher_forced, graph);
  CHECK(row(tf[t_obs - 1], 0) == row(a[t_obs - 1], 0));
  CHECK_FALSE(row(tf[t_obs], 0) == row(a[t_obs], 0));
}

TEST_CASE("nll examples") {
  const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(nll(x, x, 5e-5).item() == 0);
  CHECK(nll(Tensor::scalar(0.2f), Tensor::scalar(0), 5e-5).item() == doctest::Approx(400).epsilon(1e-5));
  CHECK_THROWS_AS(nll(x, Tensor::zeros({4}), 5e-5), DimensionError);
}

TEST_CASE("schedule gaps are contract errors") {
  Fixture f;
  const auto graph = GraphIndex::fully_connected(2, 1);
  std::vector<Tensor> steps(4, Tensor::zeros({2, 4}));
  std::vector<Tensor> edges(3, constant_edges(2, 2, 0));
  edges[1] = Tensor();
  CHECK_THROWS_AS(rollout(f.params, steps, edges, 2, RolloutMode::teacher_forced, graph), ContractError);
  CHECK_THROWS_AS(rollout(f.params, steps, {edges[0]}, 2, RolloutMode::teacher_forced, graph), ContractError);

  SegmentSchedule s{2, 6, {{{2, 2}, {5, 1}}, {{2, 4}}}};
  for (auto& segs : s.edges) for (auto& seg : segs) seg.edge_type = 1;
  CHECK_THROWS_AS(edges_from_schedules({s}, 2), ContractError);
  s.edges[0][0].duration = 3;
  const auto oh = edges_from_schedules({s}, 2);
  REQUIRE(oh.size() == 5);
  CHECK(oh[0].at(0, 1) == 1);
  s.edges[1][0].edge_type = -1;
  CHECK_THROWS_AS(edges_from_schedules({s}, 2), ContractError);
}

TEST_CASE("edge inputs are constant within a segment") {
  SegmentSchedule s{3, 10, {{{3, 4, 0, 0, 0, 1}, {7, 3, 0, 0, 0, 0}}, {{3, 7, 0, 0, 0, 0}}}};
  const auto oh = edges_from_schedules({s}, 2);
  // Target u uses the segment covering u; burn-in targets reuse the first segment.
  for (std::size_t u = 1; u < 10; ++u) {
    const int expected = u < 7 ? 1 : 0;
    CHECK(oh[u - 1].at(0, static_cast<std::size_t>(expected)) == 1);
    CHECK(oh[u - 1].at(1, 0) == 1);
  }
}
