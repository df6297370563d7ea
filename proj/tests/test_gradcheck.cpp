#include <doctest.h>

#include "dider/errors.hpp"
#include "elbo_gradcheck.hpp"
#include "gradcheck.hpp"

using namespace dider;

static_assert(sizeof(real) == sizeof(double), "gradient checks run in double precision");

namespace {

Tensor random_param(Shape shape, Rng& rng, double lo = -2, double hi = 2) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::parameter(std::move(shape), std::move(v));
}

/// Projects an op output onto fixed random weights so that every output entry
/// contributes to the scalar loss.
Tensor project(const Tensor& y, std::uint64_t seed = 77) {
  Rng rng(seed);
  std::vector<real> w(y.numel());
  for (auto& x : w) x = rng.uniform(-1, 1);
  return sum(mul(y, Tensor::from(y.shape(), w)));
}

void check_op(const char* name, const std::function<Tensor()>& f,
              const std::vector<std::pair<std::string, Tensor>>& inputs) {
  const auto r = gradcheck::compare(f, inputs);
  INFO(name << ": " << r.worst);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-3);
}

}  // namespace

TEST_CASE("linear algebra") {
  Rng rng(1);
  Tensor a = random_param({3, 4}, rng), b = random_param({4, 2}, rng), bias = random_param({2}, rng);
  check_op("matmul", [&] { return project(matmul(a, b)); }, {{"a", a}, {"b", b}});
  check_op("linear", [&] { return project(linear(a, b, bias)); }, {{"x", a}, {"w", b}, {"b", bias}});
}

TEST_CASE("elementwise binary ops with broadcasting") {
  Rng rng(2);
  Tensor a = random_param({2, 3}, rng), b = random_param({2, 3}, rng), s = random_param({1}, rng);
  check_op("add", [&] { return project(add(a, b)); }, {{"a", a}, {"b", b}});
  check_op("sub", [&] { return project(sub(a, b)); }, {{"a", a}, {"b", b}});
  check_op("mul", [&] { return project(mul(a, b)); }, {{"a", a}, {"b", b}});
  check_op("mul scalar", [&] { return project(mul(a, s)); }, {{"a", a}, {"s", s}});
  check_op("add scalar lhs", [&] { return project(add(s, b)); }, {{"s", s}, {"b", b}});
  check_op("add_scalar", [&] { return project(add_scalar(a, 0.3)); }, {{"a", a}});
  check_op("scale", [&] { return project(scale(a, -1.7)); }, {{"a", a}});
}

TEST_CASE("elementwise unary ops") {
  Rng rng(3);
  Tensor x = random_param({3, 3}, rng);
  // Inputs kept away from kinks for relu and abs.
  std::vector<real> away(9);
  for (std::size_t i = 0; i < 9; ++i) away[i] = (i % 2 ? 1 : -1) * rng.uniform(0.1, 2);
  Tensor k = Tensor::parameter({3, 3}, away);
  Tensor pos = random_param({3, 3}, rng, 0.1, 2);
  check_op("tanh", [&] { return project(tanh(x)); }, {{"x", x}});
  check_op("sigmoid", [&] { return project(sigmoid(x)); }, {{"x", x}});
  check_op("exp", [&] { return project(exp(x)); }, {{"x", x}});
  check_op("log", [&] { return project(log(pos)); }, {{"x", pos}});
  check_op("log_floor", [&] { return project(log_floor(pos, 1e-12)); }, {{"x", pos}});
  check_op("elu", [&] { return project(elu(k)); }, {{"x", k}});
  check_op("relu", [&] { return project(relu(k)); }, {{"x", k}});
  check_op("abs", [&] { return project(abs(k)); }, {{"x", k}});
  check_op("square", [&] { return project(square(x)); }, {{"x", x}});
}

TEST_CASE("reductions and softmax") {
  Rng rng(4);
  Tensor x = random_param({3, 5}, rng);
  check_op("sum", [&] { return scale(sum(x), 1.3); }, {{"x", x}});
  check_op("mean", [&] { return scale(mean(square(x)), 2.0); }, {{"x", x}});
  check_op("softmax rows", [&] { return project(softmax(x, 1)); }, {{"x", x}});
  check_op("softmax cols", [&] { return project(softmax(x, 0)); }, {{"x", x}});
}

TEST_CASE("structural ops") {
  Rng rng(5);
  Tensor a = random_param({3, 2}, rng), b = random_param({3, 4}, rng), c = random_param({2, 2}, rng);
  Tensor w = random_param({3}, rng);
  const std::vector<std::size_t> idx{2, 0, 2, 1};
  const std::vector<std::size_t> dst{1, 1, 0};
  const std::vector<std::size_t> rep{2, 0};
  check_op("reshape", [&] { return project(reshape(a, {2, 3})); }, {{"a", a}});
  check_op("concat_cols", [&] { return project(concat_cols({a, b})); }, {{"a", a}, {"b", b}});
  check_op("concat_rows", [&] {
    const std::vector<Tensor> parts{a, c};
    return project(concat_rows(parts));
  }, {{"a", a}, {"c", c}});
  check_op("slice_cols", [&] { return project(slice_cols(b, 1, 3)); }, {{"b", b}});
  check_op("slice_rows", [&] { return project(slice_rows(b, 1, 3)); }, {{"b", b}});
  check_op("gather_rows", [&] { return project(gather_rows(a, idx)); }, {{"a", a}});
  check_op("scatter_add_rows", [&] { return project(scatter_add_rows(a, dst, 2)); }, {{"a", a}});
  check_op("replace_rows", [&] { return project(replace_rows(a, rep, c)); }, {{"base", a}, {"rows", c}});
  check_op("mul_rowwise", [&] { return project(mul_rowwise(b, w)); }, {{"x", b}, {"w", w}});
}

TEST_CASE("fused lstm nonlinearity") {
  Rng rng(6);
  Tensor gates = random_param({2, 12}, rng), c = random_param({2, 3}, rng);
  check_op("lstm_pointwise", [&] { return project(lstm_pointwise(gates, c)); }, {{"gates", gates}, {"c", c}});
}

TEST_CASE("reparameterised samplers with replayed noise") {
  Rng rng(7);
  Tensor mu = random_param({4}, rng), sigma = random_param({4}, rng, 0.2, 1.5);
  Tensor logits = random_param({3, 4}, rng);
  const Rng noise(99);
  check_op("sample_gaussian", [&] {
    Rng r = noise;
    return project(sample_gaussian(r, mu, sigma));
  }, {{"mu", mu}, {"sigma", sigma}});
  check_op("sample_gumbel_softmax", [&] {
    Rng r = noise;
    return project(sample_gumbel_softmax(r, logits, 0.5));
  }, {{"logits", logits}});
}

TEST_CASE("closed-form KL terms") {
  Rng rng(8);
  Tensor q = random_param({3, 4}, rng), p = random_param({3, 4}, rng);
  Tensor mu = random_param({5, 1}, rng, -0.9, 0.9), sigma = random_param({5, 1}, rng, 0.1, 0.9);
  check_op("edge_kl", [&] { return edge_kl(q, p); }, {{"q", q}, {"p", p}});
  check_op("duration_kl", [&] { return duration_kl(mu, sigma, 0.1, 0.8); }, {{"mu", mu}, {"sigma", sigma}});
}

TEST_CASE("full ELBO on a micro instance") {
  for (std::uint64_t seed : {3, 4}) {
    const auto r = gradcheck::micro_elbo(seed);
    INFO("seed " << seed << ": " << r.worst);
    CHECK(r.checked > 500);
    CHECK(r.max_rel_error < 1e-3);
  }
}
