#pragma once

#include "dider/abi.hpp"

#include <map>
#include <string>
#include <vector>

#include "dider/rng.hpp"
#include "dider/tensor.hpp"

namespace dider {
inline namespace DIDER_ABI {

/// Named, ordered collection of trainable tensors. Names are unique.
class ParamStore {
 public:
  /// Registers a tracked tensor with uniform(-bound, bound) entries.
  Tensor add_uniform(const std::string& name, Shape shape, real bound, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, real value);

  const std::vector<std::string>& names() const { return names_; }
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return names_.size(); }
  std::size_t scalar_count() const;

  std::vector<Tensor> tensors() const;
  void zero_grad();
  /// Overwrites values from another store with identical names and shapes.
  void copy_values_from(const ParamStore& other);
  /// Adds `weight * other.grad` into this store's gradient buffers.
  void accumulate_grads_from(const ParamStore& other, real weight);

 private:
  Tensor add(const std::string& name, Tensor t);

  std::vector<std::string> names_;
  std::map<std::string, Tensor> tensors_;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

enum class Activation { elu, relu, tanh };

/// Two-layer perceptron: in -> hidden -> out with the hidden activation after
/// the first layer and optionally after the second.
struct Mlp {
  Linear first;
  Linear second;
  Activation activation = Activation::elu;
  bool activate_output = false;

  static Mlp create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                    bool activate_output, Rng& rng, Activation activation = Activation::elu);
  Tensor operator()(const Tensor& x) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// Standard LSTM cell; forget-gate bias starts at 1.
struct LstmCell {
  Linear input;      // in -> 4H, carries the bias
  Tensor recurrent;  // [H, 4H]

  static LstmCell create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden() const { return recurrent.dim(0); }
  LstmState zero_state(std::size_t rows) const;
  LstmState operator()(const Tensor& x, const LstmState& state) const;
};

}  // namespace DIDER_ABI
}  // namespace dider
