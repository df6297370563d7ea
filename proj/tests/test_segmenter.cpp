#include <doctest.h>

#include <cmath>

#include "dider/errors.hpp"
#include "dider/segmenter.hpp"

using namespace dider;

namespace {

void zero_all(ParamStore& store) {
  for (auto& t : store.tensors()) std::ranges::fill(t.data(), real{0});
}

EdgeEmbeddings random_states(std::size_t steps, std::size_t rows, std::size_t hidden, Rng& rng) {
  EdgeEmbeddings e;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<real> a(rows * hidden), b(rows * hidden);
    for (auto& x : a) x = static_cast<real>(rng.uniform(-1, 1));
    for (auto& x : b) x = static_cast<real>(rng.uniform(-1, 1));
    e.h_prior.push_back(Tensor::from({rows, hidden}, a));
    e.h_reverse.push_back(Tensor::from({rows, hidden}, b));
  }
  return e;
}

double gaussian_kl(double mu, double sigma, double mu0, double sigma0) {
  return std::log(sigma0 / sigma) + (sigma * sigma + (mu - mu0) * (mu - mu0)) / (2 * sigma0 * sigma0) - 0.5;
}

}  // namespace

TEST_CASE("zero weights give the posterior (0, 0.5)") {
  ParamStore store;
  Rng rng(1);
  const DurationParams p = DurationParams::create(store, 8, 8, 0, 1, 1, rng);
  zero_all(store);
  const DurationPosterior post = duration_posterior(p, Tensor::full({3, 8}, 0.7f));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(post.mu.at(r) == 0);
    CHECK(post.sigma.at(r) == doctest::Approx(0.5));
  }
}

TEST_CASE("posterior ranges") {
  ParamStore store;
  Rng rng(2);
  const DurationParams p = DurationParams::create(store, 8, 8, 0, 1, 1, rng);
  std::vector<real> v(200 * 8);
  for (auto& x : v) x = static_cast<real>(rng.uniform(-50, 50));
  const DurationPosterior post = duration_posterior(p, Tensor::from({200, 8}, v));
  for (std::size_t r = 0; r < 200; ++r) {
    CHECK(post.mu.at(r) >= -1);
    CHECK(post.mu.at(r) <= 1);
    CHECK(post.sigma.at(r) >= 0);
    CHECK(post.sigma.at(r) <= 1);
  }
}

TEST_CASE("realize_duration examples") {
  CHECK(realize_duration(1.0, 45, 1) == 45);
  CHECK(realize_duration(-0.3, 45, 1) == 1);
  CHECK(realize_duration(0.5, 45, 1) == 23);
  CHECK(realize_duration(0.0, 45, 1) == 1);
  CHECK(realize_duration(2.0, 45, 1) == 45);
  CHECK(realize_duration(0.1, 45, 3) == 5);
  CHECK(realize_duration(0.01, 45, 3) == 3);
  CHECK(realize_duration(0.5, 2, 3) == 2);
  CHECK(realize_duration(std::nan(""), 10, 1) == 1);
  CHECK_THROWS_AS(realize_duration(0.5, 0, 1), ContractError);
  // Round half up against an integer oracle; z = num / 64 keeps z * rem exact.
  for (std::size_t rem = 1; rem <= 60; ++rem) {
    for (std::size_t num = 0; num <= 64; ++num) {
      const double z = static_cast<double>(num) / 64.0;
      const std::size_t expected = std::max<std::size_t>(1, (2 * num * rem + 64) / 128);
      CHECK(realize_duration(z, rem, 1) == std::min(expected, rem));
    }
  }
}

TEST_CASE("duration_kl examples") {
  CHECK(duration_kl(Tensor::scalar(0), Tensor::scalar(1), 0, 1).item() == doctest::Approx(0).scale(1));
  CHECK(duration_kl(Tensor::scalar(1), Tensor::scalar(1), 0, 1).item() == doctest::Approx(0.5));
  CHECK(duration_kl(Tensor::scalar(0.3f), Tensor::scalar(0.4f), 0.1, 0.7).item() ==
        doctest::Approx(gaussian_kl(0.3, 0.4, 0.1, 0.7)).epsilon(1e-5));
  CHECK_THROWS_AS(duration_kl(Tensor::scalar(0), Tensor::scalar(0), 0, 1), ContractError);
}

TEST_CASE("duration_kl agrees with a Monte-Carlo estimate") {
  Rng rng(3);
  const double mu = 0.4, sigma = 0.6, mu0 = 0.0, sigma0 = 1.0;
  const std::size_t n = 400000;
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = mu + sigma * rng.normal();
    const double log_q = -0.5 * std::pow((z - mu) / sigma, 2) - std::log(sigma);
    const double log_p = -0.5 * std::pow((z - mu0) / sigma0, 2) - std::log(sigma0);
    acc += log_q - log_p;
  }
  CHECK(std::abs(acc / n - duration_kl(Tensor::scalar(mu), Tensor::scalar(sigma), mu0, sigma0).item()) < 0.01);
}

TEST_CASE("duration_kl is non-negative and vanishes only at the prior") {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const real mu = static_cast<real>(rng.uniform(-1, 1));
    const real sigma = static_cast<real>(rng.uniform(0.01, 1));
    const double mu0 = rng.uniform(-1, 1), sigma0 = rng.uniform(0.1, 2);
    CHECK(duration_kl(Tensor::scalar(mu), Tensor::scalar(sigma), mu0, sigma0).item() >= -1e-6);
  }
  CHECK(std::abs(duration_kl(Tensor::scalar(0.25f), Tensor::scalar(0.5f), 0.25, 0.5).item()) < 1e-6);
}

TEST_CASE("forced durations") {
  ParamStore store;
  Rng rng(5);
  const DurationParams p = DurationParams::create(store, 8, 8, 0, 1, 1, rng);
  const EdgeEmbeddings states = random_states(50, 6, 8, rng);
  SUBCASE("z = 1 gives one segment per edge") {
    const auto s = build_schedule(p, states, 5, 50, rng, DurationVariant::past_only, true,
                                  [](std::size_t, std::size_t) { return 1.0; });
    CHECK(s.partition_violation().empty());
    for (const auto& segs : s.edges) {
      REQUIRE(segs.size() == 1);
      CHECK(segs[0].t_start == 5);
      CHECK(segs[0].duration == 45);
    }
  }
  SUBCASE("z = 0 gives unit segments") {
    const auto s = build_schedule(p, states, 5, 50, rng, DurationVariant::past_only, true,
                                  [](std::size_t, std::size_t) { return 0.0; });
    CHECK(s.partition_violation().empty());
    CHECK(s.mean_segments_per_edge() == 45);
  }
}

TEST_CASE("schedules tile the prediction window for random inputs") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    ParamStore store;
    const std::size_t d_min = 1 + seed % 3;
    const auto variant = seed % 2 ? DurationVariant::full_trajectory : DurationVariant::past_only;
    const std::size_t input = variant == DurationVariant::full_trajectory ? 8 : 4;
    const DurationParams p = DurationParams::create(store, input, 4, 0, 1, d_min, rng);
    const std::size_t horizon = 6 + rng.next_u64() % 40;
    const std::size_t t_obs = 1 + rng.next_u64() % (horizon - 1);
    const EdgeEmbeddings states = random_states(horizon, 2, 4, rng);
    const auto s = build_schedule(p, states, t_obs, horizon, rng, variant, true);
    INFO("seed " << seed);
    // Durations may fall below d_min only for the tail remainder.
    CHECK(s.partition_violation(1).empty());
    for (const auto& segs : s.edges) {
      for (const auto& seg : segs) CHECK((seg.duration >= d_min || seg.t_end() == horizon));
    }
  }
}

TEST_CASE("past-only schedules ignore states after the decision step") {
  ParamStore store;
  Rng rng(6);
  const DurationParams p = DurationParams::create(store, 8, 8, 0, 1, 1, rng);
  const EdgeEmbeddings a = random_states(30, 4, 8, rng);
  const std::size_t cut = 14;
  EdgeEmbeddings b = random_states(30, 4, 8, rng);
  for (std::size_t t = 0; t <= cut; ++t) b.h_prior[t] = a.h_prior[t];
  Rng r1(7), r2(7);
  const auto sa = build_schedule(p, a, 5, 30, r1, DurationVariant::past_only, false);
  const auto sb = build_schedule(p, b, 5, 30, r2, DurationVariant::past_only, false);
  for (std::size_t e = 0; e < 4; ++e) {
    for (std::size_t k = 0; k < sa.edges[e].size(); ++k) {
      // Segment k is decided at step t_start - 1.
      if (sa.edges[e][k].t_start - 1 > cut) break;
      REQUIRE(k < sb.edges[e].size());
      CHECK(sa.edges[e][k] == sb.edges[e][k]);
    }
  }
}

TEST_CASE("schedule helpers") {
  SegmentSchedule s{2, 6, {{{2, 3}, {5, 1}}, {{2, 4}}}};
  CHECK(s.partition_violation().empty());
  CHECK(s.mean_segments_per_edge() == 1.5);
  s.edges[0][0].edge_type = 1;
  s.edges[0][1].edge_type = 0;
  s.edges[1][0].edge_type = 1;
  const auto x = s.expand();
  CHECK(x[0] == std::vector<int>{1, 1, 1, 0});
  CHECK(x[1] == std::vector<int>{1, 1, 1, 1});
  s.edges[1][0].duration = 3;
  CHECK_FALSE(s.partition_violation().empty());
  ScheduleBuilder b(1, 2, 6, 1);
  CHECK(b.reading_at(1) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(b.commit(0, {3, 1}), ContractError);
  b.commit(0, {2, 4});
  CHECK(b.complete());
  CHECK_THROWS_AS(ScheduleBuilder(1, 0, 6, 1), ContractError);
}
