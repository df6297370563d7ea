#pragma once

#include "dider/abi.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dider/rng.hpp"

namespace dider {
inline namespace DIDER_ABI {

#ifdef DIDER_SCALAR_DOUBLE
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<real> data;
  /// Empty until the first gradient contribution arrives.
  std::vector<real> grad;
  /// Only tracked nodes accumulate gradient.
  bool tracked = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  std::vector<real>& grad_buffer();
};

/// Handle to a dense row-major array. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, real value);
  static Tensor from(Shape shape, std::vector<real> values);
  static Tensor scalar(real value);
  /// Tracked leaf: gradients accumulate into it during backward.
  static Tensor parameter(Shape shape, std::vector<real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  /// Extent of axis 0 (rows of a matrix).
  std::size_t rows() const { return rank() == 0 ? 1 : node_->shape[0]; }
  /// Product of all trailing extents.
  std::size_t cols() const;

  std::span<real> data() { return node_->data; }
  std::span<const real> data() const { return node_->data; }
  std::span<const real> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool tracked() const { return node_->tracked; }
  const char* op() const { return node_->op; }

  real item() const;
  real at(std::size_t i) const { return node_->data.at(i); }
  real at(std::size_t r, std::size_t c) const { return node_->data.at(r * cols() + c); }

  void zero_grad() { node_->grad.clear(); }
  /// Untracked deep copy.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  TensorNode& node() const { return *node_; }
  const std::shared_ptr<TensorNode>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Ordered record of differentiable operations. Parents always precede children.
class GradTape {
 public:
  void record(std::shared_ptr<TensorNode> node) { nodes_.push_back(std::move(node)); }
  /// Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<TensorNode>>& nodes() const { return nodes_; }

  /// Name of the first recorded op whose output is non-finite, or empty.
  std::string first_non_finite() const;

 private:
  std::vector<std::shared_ptr<TensorNode>> nodes_;
};

/// Installs a tape as the active tape of the calling thread. Passing nullptr
/// disables recording (inference).
class TapeScope {
 public:
  explicit TapeScope(GradTape* tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

GradTape* active_tape();

void backward(GradTape& tape, const Tensor& loss);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[m,k] * w[k,n] + b[n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- elementwise (equal shapes, or one side a single-element tensor) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, real c);
Tensor scale(const Tensor& x, real c);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& x);
/// log(max(x, floor)); never throws.
Tensor log_floor(const Tensor& x, real floor);
Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);

enum class Elementwise { add, mul, sub, tanh, sigmoid, exp, log, relu };
/// Dispatches to the named op; binary ops take two arguments, unary ops one.
Tensor elementwise(Elementwise op, std::initializer_list<Tensor> args);

// ---- reductions ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

// ---- structural (matrices: axis 0 = rows) ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
/// out[index[r]] += x[r]; out has n_rows rows.
Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_rows);
/// Copy of base with rows index[r] replaced by rows[r].
Tensor replace_rows(const Tensor& base, std::span<const std::size_t> index, const Tensor& rows);
/// x[m,n] scaled row-wise by w[m,1].
Tensor mul_rowwise(const Tensor& x, const Tensor& w);

/// Fused LSTM nonlinearity. gates[m,4H] in (input, forget, cell, output)
/// order, c[m,H]; returns [m,2H] holding [h', c'].
Tensor lstm_pointwise(const Tensor& gates, const Tensor& c);

// ---- sampling ----
/// mu + sigma * eps with eps ~ N(0,1); gradient flows into mu and sigma.
Tensor sample_gaussian(Rng& rng, const Tensor& mu, const Tensor& sigma);
/// softmax((logits + g) / tau) along the last axis, g ~ Gumbel(0,1).
Tensor sample_gumbel_softmax(Rng& rng, const Tensor& logits, real tau);
/// Forward: one-hot of the row argmax. Backward: identity.
Tensor straight_through(const Tensor& soft);
/// Row-wise one-hot of the argmax along the last axis (not differentiable).
Tensor onehot_argmax(const Tensor& x);

}  // namespace DIDER_ABI
}  // namespace dider
