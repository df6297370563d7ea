#include "dider/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace {

thread_local GradTape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<TensorNode>;

bool is_unit(const Tensor& t) { return t.numel() == 1; }

/// Allocates the output node. It is tracked (and recorded) only when a tape
/// is active and at least one input is tracked.
Tensor make_output(Shape shape, const char* op, std::initializer_list<const Tensor*> inputs) {
  auto node = std::make_shared<TensorNode>();
  node->data.assign(shape_numel(shape), real{0});
  node->shape = std::move(shape);
  node->op = op;
  if (g_active_tape != nullptr) {
    for (const Tensor* in : inputs) {
      if (in->tracked()) {
        node->tracked = true;
        break;
      }
    }
    if (node->tracked) {
      node->parents.reserve(inputs.size());
      for (const Tensor* in : inputs) node->parents.push_back(in->node_ptr());
      g_active_tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_output_n(Shape shape, const char* op, std::span<const Tensor> inputs) {
  auto node = std::make_shared<TensorNode>();
  node->data.assign(shape_numel(shape), real{0});
  node->shape = std::move(shape);
  node->op = op;
  if (g_active_tape != nullptr) {
    node->tracked = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.tracked(); });
    if (node->tracked) {
      for (const Tensor& in : inputs) node->parents.push_back(in.node_ptr());
      g_active_tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

void set_backward(Tensor& out, std::function<void(TensorNode&)> fn) {
  if (out.tracked()) out.node().backward = std::move(fn);
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const real* a, const real* b, real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    real* crow = c + i * n;
    const real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const real av = arow[p];
      if (av == real{0}) continue;
      const real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A[m,n] * B[k,n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const real* a, const real* b, real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a + i * n;
    real* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const real* brow = b + p * n;
      real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const real* a, const real* b, real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a + i * k;
    const real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const real av = arow[p];
      if (av == real{0}) continue;
      real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Bwd bwd) {
  Tensor out = make_output(x.shape(), op, {&x});
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);
  set_backward(out, [bwd](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bwd(in.data[i], self.data[i]);
  });
  return out;
}

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp kind, const char* op) {
  const bool same = a.shape() == b.shape();
  if (!same && !is_unit(a) && !is_unit(b)) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Shape shape = (same || is_unit(b)) ? a.shape() : b.shape();
  Tensor out = make_output(shape, op, {&a, &b});
  const std::size_t n = out.numel();
  const std::size_t sa = a.numel() == n ? 1 : 0;
  const std::size_t sb = b.numel() == n ? 1 : 0;
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const real x = ad[i * sa];
    const real y = bd[i * sb];
    od[i] = kind == BinOp::add ? x + y : kind == BinOp::sub ? x - y : x * y;
  }
  set_backward(out, [kind, sa, sb](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const std::size_t n = self.data.size();
    if (na.tracked) {
      auto& g = na.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const real d = kind == BinOp::mul ? nb.data[i * sb] : real{1};
        g[i * sa] += self.grad[i] * d;
      }
    }
    if (nb.tracked) {
      auto& g = nb.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const real d = kind == BinOp::mul ? na.data[i * sa] : kind == BinOp::sub ? real{-1} : real{1};
        g[i * sb] += self.grad[i] * d;
      }
    }
  });
  return out;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<real>& TensorNode::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), real{0});
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

std::size_t Tensor::cols() const {
  if (rank() <= 1) return 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < rank(); ++i) c *= node_->shape[i];
  return c;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), real{0}); }

Tensor Tensor::full(Shape shape, real value) {
  auto node = std::make_shared<TensorNode>();
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<real> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(real value) { return from({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<real> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node().tracked = true;
  t.node().op = "parameter";
  return t;
}

real Tensor::item() const {
  if (numel() != 1) throw ContractError("item(): tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->data); }

// ---------------------------------------------------------------------------
// Tape

TapeScope::TapeScope(GradTape* tape) : previous_(g_active_tape) { g_active_tape = tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

GradTape* active_tape() { return g_active_tape; }

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.tracked()) throw ContractError("backward: loss is not tracked by any tape");
  loss.node().grad_buffer()[0] += real{1};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorNode& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
}

std::string GradTape::first_non_finite() const {
  for (const auto& node : nodes_) {
    for (real v : node->data) {
      if (!std::isfinite(v)) return std::string(node->op) + " " + shape_str(node->shape);
    }
  }
  return {};
}

void backward(GradTape& tape, const Tensor& loss) { tape.backward(loss); }

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = make_output({m, n}, "matmul", {&a, &b});
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data().data());
  set_backward(out, [m, k, n](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    if (na.tracked) gemm_nt(m, n, k, self.grad.data(), nb.data.data(), na.grad_buffer().data());
    if (nb.tracked) gemm_tn(m, k, n, na.data.data(), self.grad.data(), nb.grad_buffer().data());
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  if (x.dim(1) != w.dim(0) || b.numel() != w.dim(1)) {
    throw DimensionError("linear: incompatible shapes " + shape_str(x.shape()) + " x " + shape_str(w.shape()) +
                         " + " + shape_str(b.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  Tensor out = make_output({m, n}, "linear", {&x, &w, &b});
  real* od = out.data().data();
  const real* bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i) std::copy(bd, bd + n, od + i * n);
  gemm_nn(m, k, n, x.data().data(), w.data().data(), od);
  set_backward(out, [m, k, n](TensorNode& self) {
    TensorNode& nx = *self.parents[0];
    TensorNode& nw = *self.parents[1];
    TensorNode& nb = *self.parents[2];
    if (nx.tracked) gemm_nt(m, n, k, self.grad.data(), nw.data.data(), nx.grad_buffer().data());
    if (nw.tracked) gemm_tn(m, k, n, nx.data.data(), self.grad.data(), nw.grad_buffer().data());
    if (nb.tracked) {
      auto& g = nb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const real* row = self.grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) g[j] += row[j];
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }

Tensor add_scalar(const Tensor& x, real c) {
  return unary(x, "add_scalar", [c](real v) { return v + c; }, [](real, real) { return real{1}; });
}

Tensor scale(const Tensor& x, real c) {
  return unary(x, "scale", [c](real v) { return v * c; }, [c](real, real) { return c; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](real v) { return std::tanh(v); }, [](real, real y) { return 1 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](real v) { return real{1} / (real{1} + std::exp(-v)); },
      [](real, real y) { return y * (1 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](real v) { return std::exp(v); }, [](real, real y) { return y; });
}

Tensor log(const Tensor& x) {
  for (real v : x.data()) {
    if (v <= real{0}) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(x, "log", [](real v) { return std::log(v); }, [](real v, real) { return real{1} / v; });
}

Tensor log_floor(const Tensor& x, real floor) {
  return unary(
      x, "log_floor", [floor](real v) { return std::log(std::max(v, floor)); },
      [floor](real v, real) { return v > floor ? real{1} / v : real{0}; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](real v) { return v > 0 ? v : real{0}; }, [](real v, real) { return v > 0 ? real{1} : real{0}; });
}

Tensor elu(const Tensor& x) {
  return unary(
      x, "elu", [](real v) { return v > 0 ? v : std::expm1(v); },
      [](real v, real y) { return v > 0 ? real{1} : y + 1; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](real v) { return v * v; }, [](real v, real) { return 2 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](real v) { return std::abs(v); },
      [](real v, real) { return v > 0 ? real{1} : v < 0 ? real{-1} : real{0}; });
}

Tensor elementwise(Elementwise op, std::initializer_list<Tensor> args) {
  const bool is_binary = op == Elementwise::add || op == Elementwise::mul || op == Elementwise::sub;
  if (args.size() != (is_binary ? 2u : 1u)) throw ContractError("elementwise: wrong number of arguments");
  const Tensor& a = *args.begin();
  switch (op) {
    case Elementwise::add: return add(a, *(args.begin() + 1));
    case Elementwise::mul: return mul(a, *(args.begin() + 1));
    case Elementwise::sub: return sub(a, *(args.begin() + 1));
    case Elementwise::tanh: return tanh(a);
    case Elementwise::sigmoid: return sigmoid(a);
    case Elementwise::exp: return exp(a);
    case Elementwise::log: return log(a);
    case Elementwise::relu: return relu(a);
  }
  throw ContractError("elementwise: unknown op");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  Tensor out = make_output({}, "sum", {&x});
  double acc = 0;
  for (real v : x.data()) acc += v;
  out.data()[0] = static_cast<real>(acc);
  set_backward(out, [](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (real& v : g) v += self.grad[0];
  });
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), real{1} / static_cast<real>(x.numel()));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t d = x.dim(axis);
  Tensor out = make_output(x.shape(), "softmax", {&x});
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * d * inner + in;
      real mx = xd[base];
      for (std::size_t k = 1; k < d; ++k) mx = std::max(mx, xd[base + k * inner]);
      real total = 0;
      for (std::size_t k = 0; k < d; ++k) {
        const real e = std::exp(xd[base + k * inner] - mx);
        od[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < d; ++k) od[base + k * inner] /= total;
    }
  }
  set_backward(out, [outer, inner, d](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * d * inner + i;
        real dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += self.grad[base + k * inner] * self.data[base + k * inner];
        for (std::size_t k = 0; k < d; ++k) {
          const std::size_t at = base + k * inner;
          g[at] += self.data[at] * (self.grad[at] - dot);
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Structural

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor out = make_output(std::move(shape), "reshape", {&x});
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  set_backward(out, [](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return out;
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  Tensor out = make_output_n({m, total}, "concat_cols", parts);
  real* od = out.data().data();
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const real* src = parts[k].data().data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < m; ++i) std::copy(src + i * w, src + (i + 1) * w, od + i * total + off);
    off += w;
  }
  set_backward(out, [m, total, widths](TensorNode& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      TensorNode& in = *self.parents[k];
      const std::size_t w = widths[k];
      if (in.tracked) {
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          const real* src = self.grad.data() + i * total + off;
          real* dst = g.data() + i * w;
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      }
      off += w;
    }
  });
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != n) {
      throw DimensionError("concat_rows: column counts differ, " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out = make_output_n({total, n}, "concat_rows", parts);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.numel();
  }
  set_backward(out, [offsets](TensorNode& self) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      TensorNode& in = *self.parents[k];
      if (!in.tracked) continue;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[k] + i];
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  if (begin > end || end > x.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1), w = end - begin;
  Tensor out = make_output({m, w}, "slice_cols", {&x});
  const real* src = x.data().data();
  real* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i) std::copy(src + i * n + begin, src + i * n + end, od + i * w);
  set_backward(out, [m, n, w, begin](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
    }
  });
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() < 1 || begin > end || end > x.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = end - begin;
  const std::size_t n = x.cols();
  Tensor out = make_output(std::move(shape), "slice_rows", {&x});
  std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
            x.data().begin() + static_cast<std::ptrdiff_t>(end * n), out.data().begin());
  set_backward(out, [begin, n](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
  });
  return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.dim(1);
  for (std::size_t r : index) {
    if (r >= x.dim(0)) throw DimensionError("gather_rows: index " + std::to_string(r) + " outside " + shape_str(x.shape()));
  }
  Tensor out = make_output({index.size(), n}, "gather_rows", {&x});
  const real* src = x.data().data();
  real* od = out.data().data();
  for (std::size_t i = 0; i < index.size(); ++i) std::copy(src + index[i] * n, src + (index[i] + 1) * n, od + i * n);
  set_backward(out, [idx = std::vector<std::size_t>(index.begin(), index.end()), n](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      real* dst = g.data() + idx[i] * n;
      const real* src = self.grad.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  });
  return out;
}

Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_rows) {
  require_matrix(x, "scatter_add_rows");
  if (index.size() != x.dim(0)) {
    throw DimensionError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(1);
  for (std::size_t r : index) {
    if (r >= n_rows) throw DimensionError("scatter_add_rows: target row " + std::to_string(r) + " out of range");
  }
  Tensor out = make_output({n_rows, n}, "scatter_add_rows", {&x});
  const real* src = x.data().data();
  real* od = out.data().data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    real* dst = od + index[i] * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += src[i * n + j];
  }
  set_backward(out, [idx = std::vector<std::size_t>(index.begin(), index.end()), n](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const real* src = self.grad.data() + idx[i] * n;
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += src[j];
    }
  });
  return out;
}

Tensor replace_rows(const Tensor& base, std::span<const std::size_t> index, const Tensor& rows) {
  require_matrix(base, "replace_rows");
  require_matrix(rows, "replace_rows");
  const std::size_t n = base.dim(1);
  if (rows.dim(1) != n || rows.dim(0) != index.size()) {
    throw DimensionError("replace_rows: " + shape_str(rows.shape()) + " into " + shape_str(base.shape()));
  }
  std::vector<char> replaced(base.dim(0), 0);
  for (std::size_t r : index) {
    if (r >= base.dim(0)) throw DimensionError("replace_rows: index out of range");
    if (replaced[r]) throw ContractError("replace_rows: duplicate index " + std::to_string(r));
    replaced[r] = 1;
  }
  Tensor out = make_output(base.shape(), "replace_rows", {&base, &rows});
  std::copy(base.data().begin(), base.data().end(), out.data().begin());
  real* od = out.data().data();
  const real* src = rows.data().data();
  for (std::size_t i = 0; i < index.size(); ++i) std::copy(src + i * n, src + (i + 1) * n, od + index[i] * n);
  set_backward(out, [idx = std::vector<std::size_t>(index.begin(), index.end()), replaced, n](TensorNode& self) {
    TensorNode& nb = *self.parents[0];
    TensorNode& nr = *self.parents[1];
    if (nb.tracked) {
      auto& g = nb.grad_buffer();
      for (std::size_t r = 0; r < replaced.size(); ++r) {
        if (replaced[r]) continue;
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += self.grad[r * n + j];
      }
    }
    if (nr.tracked) {
      auto& g = nr.grad_buffer();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[idx[i] * n + j];
      }
    }
  });
  return out;
}

Tensor mul_rowwise(const Tensor& x, const Tensor& w) {
  require_matrix(x, "mul_rowwise");
  if (w.numel() != x.dim(0)) {
    throw DimensionError("mul_rowwise: weights " + shape_str(w.shape()) + " for " + shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out = make_output(x.shape(), "mul_rowwise", {&x, &w});
  const real* xd = x.data().data();
  const real* wd = w.data().data();
  real* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) od[i * n + j] = xd[i * n + j] * wd[i];
  }
  set_backward(out, [m, n](TensorNode& self) {
    TensorNode& nx = *self.parents[0];
    TensorNode& nw = *self.parents[1];
    if (nx.tracked) {
      auto& g = nx.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * nw.data[i];
      }
    }
    if (nw.tracked) {
      auto& g = nw.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        real acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * nx.data[i * n + j];
        g[i] += acc;
      }
    }
  });
  return out;
}

Tensor lstm_pointwise(const Tensor& gates, const Tensor& c) {
  require_matrix(gates, "lstm_pointwise");
  require_matrix(c, "lstm_pointwise");
  const std::size_t m = c.dim(0), h = c.dim(1);
  if (gates.dim(0) != m || gates.dim(1) != 4 * h) {
    throw DimensionError("lstm_pointwise: gates " + shape_str(gates.shape()) + " vs cell " + shape_str(c.shape()));
  }
  Tensor out = make_output({m, 2 * h}, "lstm_pointwise", {&gates, &c});
  const real* gd = gates.data().data();
  const real* cd = c.data().data();
  real* od = out.data().data();
  auto sig = [](real v) { return real{1} / (real{1} + std::exp(-v)); };
  for (std::size_t r = 0; r < m; ++r) {
    const real* g = gd + r * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const real i = sig(g[j]);
      const real f = sig(g[h + j]);
      const real u = std::tanh(g[2 * h + j]);
      const real o = sig(g[3 * h + j]);
      const real cn = f * cd[r * h + j] + i * u;
      od[r * 2 * h + j] = o * std::tanh(cn);
      od[r * 2 * h + h + j] = cn;
    }
  }
  set_backward(out, [m, h, sig](TensorNode& self) {
    TensorNode& ng = *self.parents[0];
    TensorNode& nc = *self.parents[1];
    real* dg = ng.tracked ? ng.grad_buffer().data() : nullptr;
    real* dcp = nc.tracked ? nc.grad_buffer().data() : nullptr;
    for (std::size_t r = 0; r < m; ++r) {
      const real* g = ng.data.data() + r * 4 * h;
      for (std::size_t j = 0; j < h; ++j) {
        const real i = sig(g[j]);
        const real f = sig(g[h + j]);
        const real u = std::tanh(g[2 * h + j]);
        const real o = sig(g[3 * h + j]);
        const real cn = self.data[r * 2 * h + h + j];
        const real tc = std::tanh(cn);
        const real dh = self.grad[r * 2 * h + j];
        const real dc = self.grad[r * 2 * h + h + j] + dh * o * (1 - tc * tc);
        if (dg != nullptr) {
          real* row = dg + r * 4 * h;
          row[j] += dc * u * i * (1 - i);
          row[h + j] += dc * nc.data[r * h + j] * f * (1 - f);
          row[2 * h + j] += dc * i * (1 - u * u);
          row[3 * h + j] += dh * tc * o * (1 - o);
        }
        if (dcp != nullptr) dcp[r * h + j] += dc * f;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

Tensor sample_gaussian(Rng& rng, const Tensor& mu, const Tensor& sigma) {
  if (mu.shape() != sigma.shape()) {
    throw DimensionError("sample_gaussian: mu " + shape_str(mu.shape()) + " vs sigma " + shape_str(sigma.shape()));
  }
  for (real s : sigma.data()) {
    if (!(s > real{0})) throw ContractError("sample_gaussian: sigma must be positive, got " + std::to_string(s));
  }
  std::vector<real> eps(mu.numel());
  for (real& e : eps) e = static_cast<real>(rng.normal());
  return add(mu, mul(sigma, Tensor::from(mu.shape(), std::move(eps))));
}

Tensor sample_gumbel_softmax(Rng& rng, const Tensor& logits, real tau) {
  if (!(tau > real{0})) throw ContractError("sample_gumbel_softmax: tau must be positive");
  if (logits.rank() == 0) throw DimensionError("sample_gumbel_softmax: logits need at least one axis");
  std::vector<real> g(logits.numel());
  for (real& v : g) v = static_cast<real>(rng.gumbel());
  Tensor perturbed = add(logits, Tensor::from(logits.shape(), std::move(g)));
  return softmax(scale(perturbed, real{1} / tau), logits.rank() - 1);
}

Tensor straight_through(const Tensor& soft) {
  Tensor out = make_output(soft.shape(), "straight_through", {&soft});
  const std::size_t e = soft.rank() == 0 ? 1 : soft.shape().back();
  const std::size_t rows = e == 0 ? 0 : soft.numel() / e;
  auto sd = soft.data();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto first = sd.begin() + static_cast<std::ptrdiff_t>(r * e);
    const auto best = static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(e)) - first);
    od[r * e + best] = 1;
  }
  set_backward(out, [](TensorNode& self) {
    TensorNode& in = *self.parents[0];
    if (!in.tracked) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return out;
}

Tensor onehot_argmax(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t e = x.rank() == 0 ? 1 : x.shape().back();
  const std::size_t rows = e == 0 ? 0 : x.numel() / e;
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto first = xd.begin() + static_cast<std::ptrdiff_t>(r * e);
    const auto best = static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(e)) - first);
    od[r * e + best] = 1;
  }
  return out;
}

}  // namespace DIDER_ABI
}  // namespace dider
