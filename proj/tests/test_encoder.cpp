#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dider/encoder.hpp"
#include "dider/errors.hpp"
#include "dider/physics_sim.hpp"

using namespace dider;

namespace {

constexpr std::size_t kHidden = 16;

struct Fixture {
  ParamStore store;
  EncoderParams params;
  explicit Fixture(std::uint64_t seed = 1) {
    Rng rng(seed);
    params = EncoderParams::create(store, 4, kHidden, 0, rng);
  }
};

Tensor random_states(std::size_t rows, Rng& rng) {
  std::vector<real> v(rows * 4);
  for (auto& x : v) x = static_cast<real>(rng.uniform(-2, 2));
  return Tensor::from({rows, 4}, v);
}

std::vector<real> row(const Tensor& t, std::size_t r) {
  const auto d = t.data();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * t.cols()), d.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())};
}

double max_abs_diff(const std::vector<real>& a, const std::vector<real>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

}  // namespace

TEST_CASE("identical agents give symmetric edge embeddings") {
  Fixture f;
  Rng rng(2);
  Tensor x = random_states(3, rng);
  std::vector<real> v(x.data().begin(), x.data().end());
  std::copy(v.begin(), v.begin() + 4, v.begin() + 4);  // agent 1 := agent 0
  const auto graph = GraphIndex::fully_connected(3, 1);
  const Tensor h = embed_step(f.params, Tensor::from({3, 4}, v), graph);
  CHECK(h.shape() == Shape{6, kHidden});
  CHECK(row(h, edge_index(0, 1, 3)) == row(h, edge_index(1, 0, 3)));
  CHECK(row(h, edge_index(0, 2, 3)) == row(h, edge_index(1, 2, 3)));
}

TEST_CASE("embed_step is equivariant under agent relabelling") {
  Fixture f;
  Rng rng(3);
  const std::size_t n = 4;
  const auto graph = GraphIndex::fully_connected(n, 1);
  const Tensor x = random_states(n, rng);
  const Tensor h = embed_step(f.params, x, graph);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  do {
    // Agent a of the permuted input is agent perm[a] of the original.
    const Tensor xp = gather_rows(x, perm);
    const Tensor hp = embed_step(f.params, xp, graph);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        CHECK(max_abs_diff(row(hp, edge_index(a, b, n)), row(h, edge_index(perm[a], perm[b], n))) <= 1e-6);
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("two agents give two directed edges") {
  Fixture f;
  Rng rng(4);
  const auto graph = GraphIndex::fully_connected(2, 3);
  CHECK(graph.edges_per_graph() == 2);
  CHECK(graph.edge_rows() == 6);
  const Tensor h = embed_step(f.params, random_states(6, rng), graph);
  CHECK(h.shape() == Shape{6, kHidden});
}

TEST_CASE("wrong feature dimension is a dimension error") {
  Fixture f;
  CHECK_THROWS_AS(embed_step(f.params, Tensor::zeros({3, 5}), GraphIndex::fully_connected(3, 1)), DimensionError);
}

TEST_CASE("graphs in a stack do not interact") {
  Fixture f;
  Rng rng(5);
  const Tensor x = random_states(6, rng);
  const Tensor h = embed_step(f.params, x, GraphIndex::fully_connected(3, 2));
  std::vector<real> v(x.data().begin(), x.data().end());
  for (std::size_t i = 12; i < 24; ++i) v[i] += 1.0f;
  const Tensor h2 = embed_step(f.params, Tensor::from({6, 4}, v), GraphIndex::fully_connected(3, 2));
  for (std::size_t r = 0; r < 6; ++r) CHECK(row(h, r) == row(h2, r));
}

TEST_CASE("recurrences are causal and anti-causal") {
  Fixture f;
  Rng rng(6);
  const std::size_t steps = 7, t = 3;
  std::vector<Tensor> h_emb, changed;
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<real> v(2 * kHidden);
    for (auto& x : v) x = static_cast<real>(rng.uniform(-1, 1));
    h_emb.push_back(Tensor::from({2, kHidden}, v));
  }
  changed = h_emb;
  for (std::size_t k = 0; k < steps; ++k) {
    if (k == t) continue;
    std::vector<real> v(2 * kHidden);
    for (auto& x : v) x = static_cast<real>(rng.uniform(-1, 1));
    changed[k] = Tensor::from({2, kHidden}, v);
  }
  std::vector<Tensor> after = h_emb, before = h_emb;
  for (std::size_t k = t + 1; k < steps; ++k) after[k] = changed[k];
  for (std::size_t k = 0; k < t; ++k) before[k] = changed[k];

  const auto fwd = roll_forward(f.params, h_emb);
  const auto fwd_after = roll_forward(f.params, after);
  for (std::size_t k = 0; k <= t; ++k) CHECK(row(fwd[k], 0) == row(fwd_after[k], 0));
  CHECK_FALSE(row(fwd[t + 1], 0) == row(fwd_after[t + 1], 0));

  const auto rev = roll_reverse(f.params, h_emb);
  const auto rev_before = roll_reverse(f.params, before);
  for (std::size_t k = t; k < steps; ++k) CHECK(row(rev[k], 1) == row(rev_before[k], 1));
  CHECK_FALSE(row(rev[t - 1], 1) == row(rev_before[t - 1], 1));
}

TEST_CASE("single step recurrences read the zero state") {
  Fixture f;
  Rng rng(7);
  std::vector<real> v(3 * kHidden);
  for (auto& x : v) x = static_cast<real>(rng.uniform(-1, 1));
  const Tensor in = Tensor::from({3, kHidden}, v);
  const auto fwd = roll_forward(f.params, {in});
  const auto expected = f.params.forward_cell(in, f.params.forward_cell.zero_state(3)).h;
  REQUIRE(fwd.size() == 1);
  CHECK(row(fwd[0], 2) == row(expected, 2));
}

TEST_CASE("reverse recurrence is the forward recurrence on reversed time when weights are tied") {
  Fixture f;
  std::ranges::copy(f.params.forward_cell.input.weight.data(), f.params.reverse_cell.input.weight.data().begin());
  std::ranges::copy(f.params.forward_cell.input.bias.data(), f.params.reverse_cell.input.bias.data().begin());
  std::ranges::copy(f.params.forward_cell.recurrent.data(), f.params.reverse_cell.recurrent.data().begin());
  Rng rng(8);
  std::vector<Tensor> seq;
  for (int k = 0; k < 6; ++k) {
    std::vector<real> v(2 * kHidden);
    for (auto& x : v) x = static_cast<real>(rng.uniform(-1, 1));
    seq.push_back(Tensor::from({2, kHidden}, v));
  }
  std::vector<Tensor> reversed(seq.rbegin(), seq.rend());
  const auto rev = roll_reverse(f.params, seq);
  const auto fwd = roll_forward(f.params, reversed);
  for (std::size_t k = 0; k < seq.size(); ++k) CHECK(row(rev[k], 0) == row(fwd[seq.size() - 1 - k], 0));
}

TEST_CASE("every encoder weight receives gradient") {
  Fixture f;
  Rng rng(9);
  const auto graph = GraphIndex::fully_connected(3, 2);
  std::vector<Tensor> steps;
  for (int k = 0; k < 5; ++k) steps.push_back(random_states(6, rng));
  GradTape tape;
  TapeScope scope(&tape);
  const EdgeEmbeddings emb = encode(f.params, steps, graph);
  Tensor loss = Tensor::scalar(0);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    loss = add(loss, sum(mul(emb.h_prior[k], emb.h_reverse[k])));
    loss = add(loss, sum(square(emb.h_prior[k])));
  }
  tape.backward(loss);
  for (const auto& name : f.store.names()) {
    const Tensor& p = f.store.get(name);
    double norm = 0;
    for (real g : p.grad()) norm += std::abs(g);
    INFO(name);
    CHECK(norm > 0);
  }
}
