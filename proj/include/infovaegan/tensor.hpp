#pragma once

// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// A Tensor is an immutable value (shape + row-major doubles). Tensors that
// carry a node handle were produced on a Graph and participate in
// differentiation; tensors without one are constants. Gradient rules are
// written in terms of the primitives themselves, so the backward pass can be
// recorded on the same Graph and differentiated again (reverse-over-reverse).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ivg {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Primitive : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  MatMul,
  Transpose,
  Exp,
  Log,
  Pow,
  Neg,
  Sum,
  SumLast,
  Mean,
  Sqrt,
  Maximum,
  LeakyRelu,
  Sigmoid,
  Tanh,
  SoftmaxLast,
  LogSoftmaxLast,
  Reshape,
  BroadcastTo,
  SumTo,
  ConcatLast,
  SliceLast,
  Square,
  L2NormLast,
  NormalizeLast,
};

std::string_view primitive_name(Primitive op);

/// Non-tensor arguments of a primitive.
struct OpAttrs {
  double scalar = 0.0;  // Pow exponent, LeakyRelu slope
  Shape shape;          // Reshape / BroadcastTo / SumTo target
  std::size_t begin = 0;
  std::size_t end = 0;  // SliceLast range [begin, end)
};

struct NodeId {
  std::size_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

class Graph;

class Tensor {
 public:
  Tensor();  // scalar 0
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_->size(); }
  std::span<const double> values() const { return *values_; }
  double at(std::size_t flat_index) const { return (*values_)[flat_index]; }
  /// Value of a single-element tensor.
  double item() const;

  bool has_node() const { return graph_ != nullptr; }
  Graph* graph() const { return graph_; }
  NodeId node() const;

  /// Same values, no graph provenance.
  Tensor detached() const;

 private:
  friend class Graph;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  Graph* graph_ = nullptr;
  std::size_t node_ = 0;
  std::uint64_t generation_ = 0;
};

/// Gradients keyed by leaf node.
class GradientMap {
 public:
  void set(NodeId leaf, Tensor grad) { grads_.insert_or_assign(leaf, std::move(grad)); }
  const Tensor& at(NodeId leaf) const;
  const Tensor& at(const Tensor& leaf) const { return at(leaf.node()); }
  bool contains(NodeId leaf) const { return grads_.contains(leaf); }
  std::size_t size() const { return grads_.size(); }
  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }

 private:
  std::map<NodeId, Tensor> grads_;
};

/// Append-only record of primitive applications for one computation (usually
/// one training step). clear() invalidates every Tensor handle issued so far.
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Register a differentiable input with the given value.
  Tensor leaf(const Tensor& value);

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t generation() const { return generation_; }
  void clear();

  Primitive primitive(NodeId id) const { return nodes_.at(id.index).op; }
  /// Re-evaluate a recorded node from its saved inputs.
  Tensor replay(NodeId id) const;
  /// Value saved for a node when it was recorded.
  const Tensor& saved_value(NodeId id) const { return nodes_.at(id.index).value; }

 private:
  friend Tensor apply_primitive(Primitive, std::span<const Tensor>, const OpAttrs&);
  friend GradientMap backward_impl(const Tensor&, std::span<const Tensor>, bool);

  struct Node {
    Primitive op;
    std::vector<Tensor> inputs;
    Tensor value;
    OpAttrs attrs;
  };

  Tensor record(Primitive op, std::vector<Tensor> inputs, const Tensor& value, OpAttrs attrs);
  Tensor handle(std::size_t index) const;
  void check_owns(const Tensor& t) const;

  std::vector<Node> nodes_;
  std::uint64_t generation_;
};

/// Evaluate a primitive; records a node when any input lives on a Graph.
Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

/// Exact reverse-mode gradients of a scalar w.r.t. the given leaves. Leaves the
/// output does not depend on receive zeros. Gradients are constants.
GradientMap backward(const Tensor& output, std::span<const Tensor> leaves);

/// As backward(), but the gradient computation is itself recorded on the
/// Graph, so scalars built from the returned tensors can be differentiated.
GradientMap backward_differentiable(const Tensor& output, std::span<const Tensor> leaves);

// Primitive wrappers.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
Tensor neg(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor sum_last(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softmax_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor broadcast_to(const Tensor& a, Shape shape);
Tensor sum_to(const Tensor& a, Shape shape);
Tensor concat_last(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end);
Tensor square(const Tensor& a);
Tensor l2_norm_last(const Tensor& a);
Tensor normalize_last(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }

/// Numpy-style trailing-axis broadcast of two shapes.
Shape broadcast_shapes(const Shape& a, const Shape& b, std::string_view op);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Non-finite intermediates yield +infinity.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double eps = 1e-5);

}  // namespace ivg
