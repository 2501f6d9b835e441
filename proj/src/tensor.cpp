#include "infovaegan/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace ivg {

namespace {

std::uint64_t next_generation() {
  static std::uint64_t counter = 0;
  return ++counter;
}

using Values = std::vector<double>;

Tensor make(Shape shape, Values values) { return Tensor(std::move(shape), std::move(values)); }

std::string describe(std::string_view op, const Shape& a, const Shape& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << to_string(a) << " and " << to_string(b);
  return os.str();
}

// Strides of `in` expressed in the index space of `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  const std::size_t offset = out.size() - in.size();
  for (std::size_t k = in.size(); k-- > 0;) {
    if (in[k] != 1) strides[offset + k] = stride;
    stride *= in[k];
  }
  return strides;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Calls fn(out_index, a_index, b_index) for every element of the broadcast result.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, Fn&& fn) {
  const std::size_t n = numel(out);
  const std::size_t na = numel(sa);
  const std::size_t nb = numel(sb);
  if (sa == out && sb == out) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  if (sa == out && (nb == 1 || is_suffix(sb, out))) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, nb == 1 ? 0 : i % nb);
    return;
  }
  if (sb == out && (na == 1 || is_suffix(sa, out))) {
    for (std::size_t i = 0; i < n; ++i) fn(i, na == 1 ? 0 : i % na, i);
    return;
  }
  const auto stride_a = broadcast_strides(sa, out);
  const auto stride_b = broadcast_strides(sb, out);
  std::vector<std::size_t> index(out.size(), 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t k = out.size(); k-- > 0;) {
      ++index[k];
      ia += stride_a[k];
      ib += stride_b[k];
      if (index[k] < out[k]) break;
      ia -= stride_a[k] * out[k];
      ib -= stride_b[k] * out[k];
      index[k] = 0;
    }
  }
}

template <typename Fn>
Tensor binary(std::string_view name, const Tensor& a, const Tensor& b, Fn&& fn) {
  Shape out = broadcast_shapes(a.shape(), b.shape(), name);
  Values v(numel(out));
  const auto va = a.values();
  const auto vb = b.values();
  for_each_broadcast(out, a.shape(), b.shape(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { v[i] = fn(va[ia], vb[ib]); });
  return make(std::move(out), std::move(v));
}

template <typename Fn>
Tensor unary(const Tensor& a, Fn&& fn) {
  Values v(a.size());
  const auto va = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(va[i]);
  return make(a.shape(), std::move(v));
}

std::size_t last_extent(std::string_view name, const Tensor& a) {
  if (a.rank() == 0) throw ShapeError(std::string(name) + ": needs rank >= 1, got scalar");
  return a.shape().back();
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

Tensor eval_broadcast_to(const Tensor& a, const Shape& target) {
  if (broadcast_shapes(a.shape(), target, "broadcast_to") != target) {
    throw ShapeError(describe("broadcast_to", a.shape(), target));
  }
  Values v(numel(target));
  const auto va = a.values();
  for_each_broadcast(target, target, a.shape(),
                     [&](std::size_t i, std::size_t, std::size_t ia) { v[i] = va[ia]; });
  return make(target, std::move(v));
}

Tensor eval_sum_to(const Tensor& a, const Shape& target) {
  if (broadcast_shapes(target, a.shape(), "sum_to") != a.shape()) {
    throw ShapeError(describe("sum_to", a.shape(), target));
  }
  Values v(numel(target), 0.0);
  const auto va = a.values();
  for_each_broadcast(a.shape(), a.shape(), target,
                     [&](std::size_t i, std::size_t, std::size_t it) { v[it] += va[i]; });
  return make(target, std::move(v));
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor eval_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError(describe("matmul", a.shape(), b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.shape()[1]);
  Values v(static_cast<std::size_t>(m * n), 0.0);
  if (m > 0 && n > 0 && k > 0) {
    Eigen::Map<const RowMat> ma(a.values().data(), m, k);
    Eigen::Map<const RowMat> mb(b.values().data(), k, n);
    Eigen::Map<RowMat> mc(v.data(), m, n);
    mc.noalias() = ma * mb;
  }
  return make({a.shape()[0], b.shape()[1]}, std::move(v));
}

Tensor eval_transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: needs rank 2, got " + to_string(a.shape()));
  const std::size_t r = a.shape()[0];
  const std::size_t c = a.shape()[1];
  Values v(r * c);
  const auto va = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = va[i * c + j];
  return make({c, r}, std::move(v));
}

Tensor eval_softmax_last(const Tensor& a, bool log_space) {
  const std::size_t n = last_extent(log_space ? "log_softmax_last" : "softmax_last", a);
  Values v(a.size());
  const auto va = a.values();
  const std::size_t rows = n == 0 ? 0 : a.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = va.data() + r * n;
    double* y = v.data() + r * n;
    const double hi = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(x[j] - hi);
    if (log_space) {
      const double lse = hi + std::log(total);
      for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
    } else {
      for (std::size_t j = 0; j < n; ++j) y[j] = std::exp(x[j] - hi) / total;
    }
  }
  return make(a.shape(), std::move(v));
}

Tensor eval_sum_last(const Tensor& a) {
  const std::size_t n = last_extent("sum_last", a);
  Shape out = drop_last(a.shape());
  Values v(numel(out), 0.0);
  const auto va = a.values();
  for (std::size_t r = 0; r < v.size(); ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += va[r * n + j];
    v[r] = acc;
  }
  return make(std::move(out), std::move(v));
}

Tensor eval_l2_norm_last(const Tensor& a, bool normalize) {
  const std::size_t n = last_extent(normalize ? "normalize_last" : "l2_norm_last", a);
  Shape lead = drop_last(a.shape());
  const std::size_t rows = numel(lead);
  const auto va = a.values();
  Values norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += va[r * n + j] * va[r * n + j];
    norms[r] = std::sqrt(acc);
  }
  if (!normalize) return make(std::move(lead), std::move(norms));
  Values v(a.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (norms[r] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) v[r * n + j] = va[r * n + j] / norms[r];
  }
  return make(a.shape(), std::move(v));
}

Tensor eval_concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  last_extent("concat_last", parts[0]);
  const Shape lead = drop_last(parts[0].shape());
  std::size_t total = 0;
  for (const auto& p : parts) {
    last_extent("concat_last", p);
    if (drop_last(p.shape()) != lead) throw ShapeError(describe("concat_last", parts[0].shape(), p.shape()));
    total += p.shape().back();
  }
  const std::size_t rows = numel(lead);
  Values v(rows * total);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape().back();
    const auto vp = p.values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(vp.data() + r * w, w, v.data() + r * total + col);
    col += w;
  }
  Shape out = lead;
  out.push_back(total);
  return make(std::move(out), std::move(v));
}

Tensor eval_slice_last(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t n = last_extent("slice_last", a);
  if (begin > end || end > n) {
    throw ShapeError("slice_last: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside extent " + std::to_string(n));
  }
  Shape out = a.shape();
  out.back() = end - begin;
  const std::size_t rows = n == 0 ? numel(drop_last(a.shape())) : a.size() / n;
  const std::size_t w = end - begin;
  Values v(rows * w);
  const auto va = a.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(va.data() + r * n + begin, w, v.data() + r * w);
  return make(std::move(out), std::move(v));
}

Tensor evaluate(Primitive op, std::span<const Tensor> in, const OpAttrs& attrs) {
  auto arity = [&](std::size_t k) {
    if (in.size() != k) {
      throw ContractError(std::string(primitive_name(op)) + ": expected " + std::to_string(k) +
                          " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (op) {
    case Primitive::Leaf:
      arity(1);
      return in[0].detached();
    case Primitive::Add:
      arity(2);
      return binary("add", in[0], in[1], [](double x, double y) { return x + y; });
    case Primitive::Sub:
      arity(2);
      return binary("sub", in[0], in[1], [](double x, double y) { return x - y; });
    case Primitive::Mul:
      arity(2);
      return binary("mul", in[0], in[1], [](double x, double y) { return x * y; });
    case Primitive::Div:
      arity(2);
      for (double d : in[1].values()) {
        if (d == 0.0) throw DomainError("div: division by zero");
      }
      return binary("div", in[0], in[1], [](double x, double y) { return x / y; });
    case Primitive::Maximum:
      arity(2);
      return binary("maximum", in[0], in[1], [](double x, double y) { return x >= y ? x : y; });
    case Primitive::MatMul:
      arity(2);
      return eval_matmul(in[0], in[1]);
    case Primitive::Transpose:
      arity(1);
      return eval_transpose(in[0]);
    case Primitive::Exp:
      arity(1);
      return unary(in[0], [](double x) { return std::exp(x); });
    case Primitive::Log:
      arity(1);
      for (double x : in[0].values()) {
        if (!(x > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(x));
      }
      return unary(in[0], [](double x) { return std::log(x); });
    case Primitive::Pow: {
      arity(1);
      const double p = attrs.scalar;
      const bool integral = std::floor(p) == p;
      for (double x : in[0].values()) {
        if (x < 0.0 && !integral) throw DomainError("pow: negative base with non-integer exponent");
        if (x == 0.0 && p < 0.0) throw DomainError("pow: zero base with negative exponent");
      }
      return unary(in[0], [p](double x) { return std::pow(x, p); });
    }
    case Primitive::Neg:
      arity(1);
      return unary(in[0], [](double x) { return -x; });
    case Primitive::Sum: {
      arity(1);
      double acc = 0.0;
      for (double x : in[0].values()) acc += x;
      return Tensor::scalar(acc);
    }
    case Primitive::SumLast:
      arity(1);
      return eval_sum_last(in[0]);
    case Primitive::Mean: {
      arity(1);
      if (in[0].size() == 0) throw DomainError("mean: empty tensor");
      double acc = 0.0;
      for (double x : in[0].values()) acc += x;
      return Tensor::scalar(acc / static_cast<double>(in[0].size()));
    }
    case Primitive::Sqrt:
      arity(1);
      for (double x : in[0].values()) {
        if (x < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(x));
      }
      return unary(in[0], [](double x) { return std::sqrt(x); });
    case Primitive::LeakyRelu: {
      arity(1);
      const double slope = attrs.scalar;
      return unary(in[0], [slope](double x) { return x > 0.0 ? x : slope * x; });
    }
    case Primitive::Sigmoid:
      arity(1);
      return unary(in[0], [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
    case Primitive::Tanh:
      arity(1);
      return unary(in[0], [](double x) { return std::tanh(x); });
    case Primitive::SoftmaxLast:
      arity(1);
      return eval_softmax_last(in[0], false);
    case Primitive::LogSoftmaxLast:
      arity(1);
      return eval_softmax_last(in[0], true);
    case Primitive::Reshape:
      arity(1);
      if (numel(attrs.shape) != in[0].size()) throw ShapeError(describe("reshape", in[0].shape(), attrs.shape));
      return Tensor(attrs.shape, Values(in[0].values().begin(), in[0].values().end()));
    case Primitive::BroadcastTo:
      arity(1);
      return eval_broadcast_to(in[0], attrs.shape);
    case Primitive::SumTo:
      arity(1);
      return eval_sum_to(in[0], attrs.shape);
    case Primitive::ConcatLast:
      return eval_concat_last(in);
    case Primitive::SliceLast:
      arity(1);
      return eval_slice_last(in[0], attrs.begin, attrs.end);
    case Primitive::Square:
      arity(1);
      return unary(in[0], [](double x) { return x * x; });
    case Primitive::L2NormLast:
      arity(1);
      return eval_l2_norm_last(in[0], false);
    case Primitive::NormalizeLast:
      arity(1);
      return eval_l2_norm_last(in[0], true);
  }
  throw ContractError("unknown primitive");
}

// Broadcast a tensor of shape [...] along a trailing axis to `shape` = [..., n].
Tensor expand_last(const Tensor& g, const Shape& shape) {
  Shape keep = drop_last(shape);
  keep.push_back(1);
  return broadcast_to(reshape(g, keep), shape);
}

Tensor mask_like(const Tensor& a, double on, double off, const std::function<bool(double)>& pred) {
  return unary(a, [&](double x) { return pred(x) ? on : off; });
}

// Vector-Jacobian products, expressed with the public primitives so the same
// rules serve first-order (constant inputs) and recorded (attached inputs) use.
std::vector<Tensor> vjp(Primitive op, const std::vector<Tensor>& in, const OpAttrs& attrs, const Tensor& out,
                        const Tensor& g, const std::vector<bool>& needs) {
  std::vector<Tensor> grads(in.size());
  auto want = [&](std::size_t j) { return needs[j]; };
  switch (op) {
    case Primitive::Leaf:
      break;
    case Primitive::Add:
      if (want(0)) grads[0] = sum_to(g, in[0].shape());
      if (want(1)) grads[1] = sum_to(g, in[1].shape());
      break;
    case Primitive::Sub:
      if (want(0)) grads[0] = sum_to(g, in[0].shape());
      if (want(1)) grads[1] = sum_to(neg(g), in[1].shape());
      break;
    case Primitive::Mul:
      if (want(0)) grads[0] = sum_to(mul(g, in[1]), in[0].shape());
      if (want(1)) grads[1] = sum_to(mul(g, in[0]), in[1].shape());
      break;
    case Primitive::Div:
      if (want(0)) grads[0] = sum_to(div(g, in[1]), in[0].shape());
      if (want(1)) grads[1] = sum_to(neg(div(mul(g, out), in[1])), in[1].shape());
      break;
    case Primitive::MatMul:
      if (want(0)) grads[0] = matmul(g, transpose(in[1]));
      if (want(1)) grads[1] = matmul(transpose(in[0]), g);
      break;
    case Primitive::Transpose:
      grads[0] = transpose(g);
      break;
    case Primitive::Exp:
      grads[0] = mul(g, out);
      break;
    case Primitive::Log:
      grads[0] = div(g, in[0]);
      break;
    case Primitive::Pow: {
      const double p = attrs.scalar;
      if (p == 1.0) {
        grads[0] = g;
      } else if (p == 2.0) {
        grads[0] = mul(g, mul(Tensor::scalar(2.0), in[0]));
      } else {
        grads[0] = mul(g, mul(Tensor::scalar(p), pow(in[0], p - 1.0)));
      }
      break;
    }
    case Primitive::Neg:
      grads[0] = neg(g);
      break;
    case Primitive::Sum:
      grads[0] = broadcast_to(g, in[0].shape());
      break;
    case Primitive::SumLast:
      grads[0] = expand_last(g, in[0].shape());
      break;
    case Primitive::Mean:
      grads[0] = broadcast_to(mul(g, Tensor::scalar(1.0 / static_cast<double>(in[0].size()))), in[0].shape());
      break;
    case Primitive::Sqrt:
      grads[0] = div(mul(g, Tensor::scalar(0.5)), out);
      break;
    case Primitive::Maximum: {
      const Shape& s = out.shape();
      const Tensor a = eval_broadcast_to(in[0].detached(), s);
      const Tensor b = eval_broadcast_to(in[1].detached(), s);
      const Tensor take_a = binary("maximum", a, b, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
      if (want(0)) grads[0] = sum_to(mul(g, take_a), in[0].shape());
      if (want(1)) grads[1] = sum_to(mul(g, unary(take_a, [](double m) { return 1.0 - m; })), in[1].shape());
      break;
    }
    case Primitive::LeakyRelu:
      grads[0] = mul(g, mask_like(in[0], 1.0, attrs.scalar, [](double x) { return x > 0.0; }));
      break;
    case Primitive::Sigmoid:
      grads[0] = mul(g, mul(out, sub(Tensor::scalar(1.0), out)));
      break;
    case Primitive::Tanh:
      grads[0] = mul(g, sub(Tensor::scalar(1.0), square(out)));
      break;
    case Primitive::SoftmaxLast:
      grads[0] = mul(out, sub(g, expand_last(sum_last(mul(g, out)), out.shape())));
      break;
    case Primitive::LogSoftmaxLast:
      grads[0] = sub(g, mul(exp(out), expand_last(sum_last(g), out.shape())));
      break;
    case Primitive::Reshape:
      grads[0] = reshape(g, in[0].shape());
      break;
    case Primitive::BroadcastTo:
      grads[0] = sum_to(g, in[0].shape());
      break;
    case Primitive::SumTo:
      grads[0] = broadcast_to(g, in[0].shape());
      break;
    case Primitive::ConcatLast: {
      std::size_t col = 0;
      for (std::size_t j = 0; j < in.size(); ++j) {
        const std::size_t w = in[j].shape().back();
        if (want(j)) grads[j] = slice_last(g, col, col + w);
        col += w;
      }
      break;
    }
    case Primitive::SliceLast: {
      const Shape& s = in[0].shape();
      std::vector<Tensor> parts;
      auto zeros_width = [&](std::size_t w) {
        Shape z = s;
        z.back() = w;
        return Tensor::zeros(z);
      };
      if (attrs.begin > 0) parts.push_back(zeros_width(attrs.begin));
      parts.push_back(g);
      if (attrs.end < s.back()) parts.push_back(zeros_width(s.back() - attrs.end));
      grads[0] = parts.size() == 1 ? g : concat_last(parts);
      break;
    }
    case Primitive::Square:
      grads[0] = mul(g, mul(Tensor::scalar(2.0), in[0]));
      break;
    case Primitive::L2NormLast:
      grads[0] = mul(expand_last(g, in[0].shape()), normalize_last(in[0]));
      break;
    case Primitive::NormalizeLast: {
      const Shape& s = in[0].shape();
      const Tensor radial = mul(out, expand_last(sum_last(mul(g, out)), s));
      grads[0] = div(sub(g, radial), expand_last(l2_norm_last(in[0]), s));
      break;
    }
  }
  return grads;
}

Tensor unary_op(Primitive op, const Tensor& a, OpAttrs attrs = {}) {
  const Tensor in[] = {a};
  return apply_primitive(op, in, attrs);
}

Tensor binary_op(Primitive op, const Tensor& a, const Tensor& b) {
  const Tensor in[] = {a, b};
  return apply_primitive(op, in);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string_view primitive_name(Primitive op) {
  switch (op) {
    case Primitive::Leaf: return "leaf";
    case Primitive::Add: return "add";
    case Primitive::Sub: return "sub";
    case Primitive::Mul: return "mul";
    case Primitive::Div: return "div";
    case Primitive::MatMul: return "matmul";
    case Primitive::Transpose: return "transpose";
    case Primitive::Exp: return "exp";
    case Primitive::Log: return "log";
    case Primitive::Pow: return "pow";
    case Primitive::Neg: return "neg";
    case Primitive::Sum: return "sum";
    case Primitive::SumLast: return "sum_last";
    case Primitive::Mean: return "mean";
    case Primitive::Sqrt: return "sqrt";
    case Primitive::Maximum: return "maximum";
    case Primitive::LeakyRelu: return "leaky_relu";
    case Primitive::Sigmoid: return "sigmoid";
    case Primitive::Tanh: return "tanh";
    case Primitive::SoftmaxLast: return "softmax_last";
    case Primitive::LogSoftmaxLast: return "log_softmax_last";
    case Primitive::Reshape: return "reshape";
    case Primitive::BroadcastTo: return "broadcast_to";
    case Primitive::SumTo: return "sum_to";
    case Primitive::ConcatLast: return "concat_last";
    case Primitive::SliceLast: return "slice_last";
    case Primitive::Square: return "square";
    case Primitive::L2NormLast: return "l2_norm_last";
    case Primitive::NormalizeLast: return "normalize_last";
  }
  return "?";
}

Shape broadcast_shapes(const Shape& a, const Shape& b, std::string_view op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const std::size_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeError(describe(op, a, b));
    out[k] = da == 1 ? db : da;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : values_(std::make_shared<const Values>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (numel(shape_) != values.size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(values.size()));
  }
  values_ = std::make_shared<const Values>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }
Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }
Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), Values(n, value));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a single value");
  return (*values_)[0];
}

NodeId Tensor::node() const {
  if (!graph_) throw ContractError("tensor has no graph node");
  return NodeId{node_};
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape_ = shape_;
  t.values_ = values_;
  return t;
}

const Tensor& GradientMap::at(NodeId leaf) const {
  auto it = grads_.find(leaf);
  if (it == grads_.end()) throw ContractError("gradient map: no entry for node " + std::to_string(leaf.index));
  return it->second;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph() : generation_(next_generation()) {}

void Graph::clear() {
  nodes_.clear();
  generation_ = next_generation();
}

Tensor Graph::handle(std::size_t index) const {
  Tensor t = nodes_[index].value;
  t.graph_ = const_cast<Graph*>(this);
  t.node_ = index;
  t.generation_ = generation_;
  return t;
}

void Graph::check_owns(const Tensor& t) const {
  if (t.graph_ != this || t.generation_ != generation_ || t.node_ >= nodes_.size()) {
    throw ContractError("tensor handle is stale or belongs to another graph");
  }
}

Tensor Graph::record(Primitive op, std::vector<Tensor> inputs, const Tensor& value, OpAttrs attrs) {
  nodes_.push_back(Node{op, std::move(inputs), value.detached(), std::move(attrs)});
  return handle(nodes_.size() - 1);
}

Tensor Graph::leaf(const Tensor& value) { return record(Primitive::Leaf, {value.detached()}, value, {}); }

Tensor Graph::replay(NodeId id) const {
  const Node& node = nodes_.at(id.index);
  std::vector<Tensor> inputs;
  inputs.reserve(node.inputs.size());
  for (const auto& t : node.inputs) inputs.push_back(t.detached());
  return evaluate(node.op, inputs, node.attrs);
}

Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  Graph* graph = nullptr;
  for (const auto& t : inputs) {
    if (!t.has_node()) continue;
    if (graph && graph != t.graph()) {
      throw ContractError(std::string(primitive_name(op)) + ": inputs belong to different graphs");
    }
    graph = t.graph();
    graph->check_owns(t);
  }
  Tensor value = evaluate(op, inputs, attrs);
  if (!graph) return value;
  return graph->record(op, std::vector<Tensor>(inputs.begin(), inputs.end()), value, attrs);
}

GradientMap backward_impl(const Tensor& output, std::span<const Tensor> leaves, bool differentiable) {
  if (!output.has_node()) throw ContractError("backward: output is not recorded on a graph");
  if (output.size() != 1) {
    throw ContractError("backward: output must be scalar, got shape " + to_string(output.shape()));
  }
  Graph& graph = *output.graph();
  graph.check_owns(output);
  const std::size_t n = output.node().index + 1;

  std::vector<bool> needed(n, false);
  std::vector<bool> requested(n, false);
  for (const auto& leaf : leaves) {
    if (!leaf.has_node() || leaf.graph() != &graph) {
      throw ContractError("backward: leaf is not on the output's graph");
    }
    graph.check_owns(leaf);
    const std::size_t i = leaf.node().index;
    if (i < n) needed[i] = requested[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (needed[i]) continue;
    for (const auto& in : graph.nodes_[i].inputs) {
      if (in.has_node() && needed[in.node().index]) {
        needed[i] = true;
        break;
      }
    }
  }

  std::vector<std::optional<Tensor>> adjoint(n);
  std::vector<std::optional<Tensor>> found(n);
  adjoint[n - 1] = Tensor::full(output.shape(), 1.0);
  for (std::size_t i = n; i-- > 0;) {
    if (!needed[i] || !adjoint[i]) continue;
    const Tensor g = *adjoint[i];
    adjoint[i].reset();
    if (requested[i]) found[i] = g;
    // Copies: vjp may append to graph.nodes_ in differentiable mode.
    const Primitive op = graph.nodes_[i].op;
    if (op == Primitive::Leaf) continue;
    const std::vector<Tensor> attached = graph.nodes_[i].inputs;
    const OpAttrs attrs = graph.nodes_[i].attrs;
    std::vector<bool> needs(attached.size());
    std::vector<Tensor> inputs;
    inputs.reserve(attached.size());
    for (std::size_t j = 0; j < attached.size(); ++j) {
      needs[j] = attached[j].has_node() && needed[attached[j].node().index];
      inputs.push_back(differentiable ? attached[j] : attached[j].detached());
    }
    const Tensor out = differentiable ? graph.handle(i) : graph.nodes_[i].value;
    auto grads = vjp(op, inputs, attrs, out, differentiable ? g : g.detached(), needs);
    for (std::size_t j = 0; j < attached.size(); ++j) {
      if (!needs[j]) continue;
      auto& slot = adjoint[attached[j].node().index];
      slot = slot ? add(*slot, grads[j]) : grads[j];
    }
  }

  GradientMap result;
  for (const auto& leaf : leaves) {
    const std::size_t i = leaf.node().index;
    if (i < n && found[i]) {
      result.set(leaf.node(), *found[i]);
    } else {
      result.set(leaf.node(), Tensor::zeros(leaf.shape()));
    }
  }
  return result;
}

GradientMap backward(const Tensor& output, std::span<const Tensor> leaves) {
  return backward_impl(output, leaves, false);
}

GradientMap backward_differentiable(const Tensor& output, std::span<const Tensor> leaves) {
  return backward_impl(output, leaves, true);
}

// ---------------------------------------------------------------------------
// Primitive wrappers

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(Primitive::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(Primitive::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(Primitive::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(Primitive::Div, a, b); }
Tensor matmul(const Tensor& a, const Tensor& b) { return binary_op(Primitive::MatMul, a, b); }
Tensor maximum(const Tensor& a, const Tensor& b) { return binary_op(Primitive::Maximum, a, b); }
Tensor transpose(const Tensor& a) { return unary_op(Primitive::Transpose, a); }
Tensor exp(const Tensor& a) { return unary_op(Primitive::Exp, a); }
Tensor log(const Tensor& a) { return unary_op(Primitive::Log, a); }
Tensor pow(const Tensor& a, double exponent) { return unary_op(Primitive::Pow, a, {.scalar = exponent}); }
Tensor neg(const Tensor& a) { return unary_op(Primitive::Neg, a); }
Tensor sum(const Tensor& a) { return unary_op(Primitive::Sum, a); }
Tensor sum_last(const Tensor& a) { return unary_op(Primitive::SumLast, a); }
Tensor mean(const Tensor& a) { return unary_op(Primitive::Mean, a); }
Tensor sqrt(const Tensor& a) { return unary_op(Primitive::Sqrt, a); }
Tensor leaky_relu(const Tensor& a, double slope) { return unary_op(Primitive::LeakyRelu, a, {.scalar = slope}); }
Tensor sigmoid(const Tensor& a) { return unary_op(Primitive::Sigmoid, a); }
Tensor tanh(const Tensor& a) { return unary_op(Primitive::Tanh, a); }
Tensor softmax_last(const Tensor& a) { return unary_op(Primitive::SoftmaxLast, a); }
Tensor log_softmax_last(const Tensor& a) { return unary_op(Primitive::LogSoftmaxLast, a); }
Tensor square(const Tensor& a) { return unary_op(Primitive::Square, a); }
Tensor l2_norm_last(const Tensor& a) { return unary_op(Primitive::L2NormLast, a); }
Tensor normalize_last(const Tensor& a) { return unary_op(Primitive::NormalizeLast, a); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (a.shape() == shape) return a;
  return unary_op(Primitive::Reshape, a, {.shape = std::move(shape)});
}

Tensor broadcast_to(const Tensor& a, Shape shape) {
  if (a.shape() == shape) return a;
  return unary_op(Primitive::BroadcastTo, a, {.shape = std::move(shape)});
}

Tensor sum_to(const Tensor& a, Shape shape) {
  if (a.shape() == shape) return a;
  return unary_op(Primitive::SumTo, a, {.shape = std::move(shape)});
}

Tensor concat_last(std::span<const Tensor> parts) { return apply_primitive(Primitive::ConcatLast, parts); }

Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end) {
  return unary_op(Primitive::SliceLast, a, {.begin = begin, .end = end});
}

// ---------------------------------------------------------------------------

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Graph graph;
  const Tensor leaf = graph.leaf(x);
  const Tensor leaves[] = {leaf};
  Tensor analytic;
  try {
    analytic = backward(f(leaf), leaves).at(leaf);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }

  double worst = 0.0;
  std::vector<double> probe(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    double hi = 0.0;
    double lo = 0.0;
    try {
      probe[i] = saved + eps;
      hi = f(Tensor(x.shape(), probe)).item();
      probe[i] = saved - eps;
      lo = f(Tensor(x.shape(), probe)).item();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
    probe[i] = saved;
    const double numeric = (hi - lo) / (2.0 * eps);
    const double a = analytic.at(i);
    if (!std::isfinite(numeric) || !std::isfinite(a)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace ivg
