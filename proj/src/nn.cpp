#include "dider/nn.hpp"

#include <cmath>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (tensors_.count(name) != 0) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  names_.push_back(name);
  tensors_.emplace(name, t);
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, real bound, Rng& rng) {
  std::vector<real> values(shape_numel(shape));
  for (real& v : values) v = static_cast<real>(rng.uniform(-bound, bound));
  return add(name, Tensor::parameter(std::move(shape), std::move(values)));
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, real value) {
  std::vector<real> values(shape_numel(shape), value);
  return add(name, Tensor::parameter(std::move(shape), std::move(values)));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(names_.size());
  for (const auto& name : names_) out.push_back(tensors_.at(name));
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.names_ != names_) throw ContractError("ParamStore: parameter sets differ");
  for (const auto& name : names_) {
    Tensor dst = tensors_.at(name);
    const Tensor& src = other.get(name);
    if (src.shape() != dst.shape()) throw DimensionError("ParamStore: shape mismatch for '" + name + "'");
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
}

void ParamStore::accumulate_grads_from(const ParamStore& other, real weight) {
  if (other.names_ != names_) throw ContractError("ParamStore: parameter sets differ");
  for (const auto& name : names_) {
    const Tensor& src = other.get(name);
    if (!src.has_grad()) continue;
    auto& g = tensors_.at(name).node().grad_buffer();
    auto sg = src.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight * sg[i];
  }
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const real bound = real{1} / std::sqrt(static_cast<real>(in));
  Linear l;
  l.weight = store.add_uniform(name + ".weight", {in, out}, bound, rng);
  l.bias = store.add_uniform(name + ".bias", {out}, bound, rng);
  return l;
}

namespace {
Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::elu: return elu(x);
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}
}  // namespace

Mlp Mlp::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                bool activate_output, Rng& rng, Activation activation) {
  Mlp m;
  m.first = Linear::create(store, name + ".0", in, hidden, rng);
  m.second = Linear::create(store, name + ".1", hidden, out, rng);
  m.activation = activation;
  m.activate_output = activate_output;
  return m;
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = activate(first(x), activation);
  Tensor y = second(h);
  return activate_output ? activate(y, activation) : y;
}

LstmCell LstmCell::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  LstmCell cell;
  const real bound = real{1} / std::sqrt(static_cast<real>(hidden));
  cell.input.weight = store.add_uniform(name + ".input.weight", {in, 4 * hidden}, bound, rng);
  std::vector<real> bias(4 * hidden, real{0});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = real{1};
  cell.input.bias = store.add_constant(name + ".input.bias", {4 * hidden}, real{0});
  std::copy(bias.begin(), bias.end(), cell.input.bias.data().begin());
  cell.recurrent = store.add_uniform(name + ".recurrent", {hidden, 4 * hidden}, bound, rng);
  return cell;
}

LstmState LstmCell::zero_state(std::size_t rows) const {
  return {Tensor::zeros({rows, hidden()}), Tensor::zeros({rows, hidden()})};
}

LstmState LstmCell::operator()(const Tensor& x, const LstmState& state) const {
  const std::size_t h = hidden();
  Tensor gates = add(input(x), matmul(state.h, recurrent));
  Tensor hc = lstm_pointwise(gates, state.c);
  return {slice_cols(hc, 0, h), slice_cols(hc, h, 2 * h)};
}

}  // namespace DIDER_ABI
}  // namespace dider
