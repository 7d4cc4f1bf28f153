#include "debtlens/onnx_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Core>

#include "debtlens/common.hpp"
#include "onnx.pb.h"

namespace debtlens::onnx {

using Shape = std::vector<std::int64_t>;

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

Tensor Tensor::floats(Shape shape, std::vector<double> data) {
  Tensor t;
  t.dtype = DType::Float;
  t.shape = std::move(shape);
  t.f = std::move(data);
  return t;
}

Tensor Tensor::ints(Shape shape, std::vector<std::int64_t> data) {
  Tensor t;
  t.dtype = DType::Int;
  t.shape = std::move(shape);
  t.i = std::move(data);
  return t;
}

Tensor Tensor::bools(Shape shape, std::vector<std::int64_t> data) {
  Tensor t = ints(std::move(shape), std::move(data));
  t.dtype = DType::Bool;
  return t;
}

std::size_t Tensor::numel() const { return shape_numel(shape); }

std::vector<std::int64_t> Tensor::int_values() const {
  std::vector<std::int64_t> out(numel());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = as_int(k);
  return out;
}

const Attribute* Node::attr(const std::string& key) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? nullptr : &it->second;
}

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  const Attribute* a = attr(key);
  return a ? a->i : fallback;
}

double Node::attr_float(const std::string& key, double fallback) const {
  const Attribute* a = attr(key);
  return a ? a->f : fallback;
}

namespace {

// ---------------------------------------------------------------------------
// Helpers

[[noreturn]] void fail(const Node& n, const std::string& what) {
  throw LoadError("node '" + n.name + "' (" + n.op + "): " + what);
}

std::size_t norm_axis(const Node& n, std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < -r || axis >= std::max<std::int64_t>(r, 1)) fail(n, "axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

Shape strides_of(const Shape& s) {
  Shape st(s.size(), 1);
  for (std::size_t k = s.size(); k-- > 1;) st[k - 1] = st[k] * s[k];
  return st;
}

Shape broadcast_shape(const Node& n, const Shape& a, const Shape& b) {
  Shape out(std::max(a.size(), b.size()), 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::int64_t da = k < out.size() - a.size() ? 1 : a[k - (out.size() - a.size())];
    const std::int64_t db = k < out.size() - b.size() ? 1 : b[k - (out.size() - b.size())];
    if (da != db && da != 1 && db != 1) fail(n, "shapes are not broadcastable");
    out[k] = da == 1 ? db : da;
  }
  return out;
}

// For each flat position of `out`, the flat position in a tensor of shape `in`
// broadcast to `out`.
std::vector<std::size_t> broadcast_offsets(const Shape& in, const Shape& out) {
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> idx(n);
  const std::size_t lead = out.size() - in.size();
  const Shape in_st = strides_of(in);
  Shape st(out.size(), 0);
  for (std::size_t k = 0; k < in.size(); ++k) st[lead + k] = in[k] == 1 ? 0 : in_st[k];
  Shape counter(out.size(), 0);
  std::size_t off = 0;
  for (std::size_t p = 0; p < n; ++p) {
    idx[p] = off;
    for (std::size_t k = out.size(); k-- > 0;) {
      if (++counter[k] < out[k]) {
        off += static_cast<std::size_t>(st[k]);
        break;
      }
      off -= static_cast<std::size_t>(st[k] * (out[k] - 1));
      counter[k] = 0;
    }
  }
  return idx;
}

const Tensor& need(const Node& n, const std::vector<const Tensor*>& in, std::size_t k) {
  if (k >= in.size() || in[k] == nullptr) fail(n, "missing input " + std::to_string(k));
  return *in[k];
}

const Tensor* opt(const std::vector<const Tensor*>& in, std::size_t k) {
  return k < in.size() ? in[k] : nullptr;
}

Tensor as_float(const Tensor& t) {
  if (t.is_float()) return t;
  std::vector<double> v(t.i.begin(), t.i.end());
  return Tensor::floats(t.shape, std::move(v));
}

// Axes from the attribute (older opsets) or the given input.
std::optional<std::vector<std::int64_t>> axes_of(const Node& n, const std::vector<const Tensor*>& in,
                                                 std::size_t input_index) {
  if (const Attribute* a = n.attr("axes")) return a->ints;
  if (const Tensor* t = opt(in, input_index)) return t->int_values();
  return std::nullopt;
}

using OpFn = std::function<std::vector<Tensor>(const Node&, const std::vector<const Tensor*>&,
                                               std::int64_t opset)>;

// ---------------------------------------------------------------------------
// Elementwise

template <typename FloatOp, typename IntOp>
Tensor binary(const Node& n, const Tensor& a, const Tensor& b, FloatOp fop, IntOp iop) {
  const Shape out = broadcast_shape(n, a.shape, b.shape);
  const auto ia = broadcast_offsets(a.shape, out);
  const auto ib = broadcast_offsets(b.shape, out);
  const std::size_t total = ia.size();
  if (a.is_float() || b.is_float()) {
    std::vector<double> v(total);
    for (std::size_t p = 0; p < total; ++p) v[p] = fop(a.as_double(ia[p]), b.as_double(ib[p]));
    return Tensor::floats(out, std::move(v));
  }
  std::vector<std::int64_t> v(total);
  for (std::size_t p = 0; p < total; ++p) v[p] = iop(a.i[ia[p]], b.i[ib[p]]);
  Tensor t = Tensor::ints(out, std::move(v));
  if (a.dtype == DType::Bool && b.dtype == DType::Bool) t.dtype = DType::Bool;
  return t;
}

template <typename Cmp>
Tensor compare(const Node& n, const Tensor& a, const Tensor& b, Cmp cmp) {
  const Shape out = broadcast_shape(n, a.shape, b.shape);
  const auto ia = broadcast_offsets(a.shape, out);
  const auto ib = broadcast_offsets(b.shape, out);
  std::vector<std::int64_t> v(ia.size());
  const bool fl = a.is_float() || b.is_float();
  for (std::size_t p = 0; p < v.size(); ++p)
    v[p] = fl ? cmp(a.as_double(ia[p]), b.as_double(ib[p])) : cmp(a.i[ia[p]], b.i[ib[p]]);
  return Tensor::bools(out, std::move(v));
}

template <typename F>
OpFn unary_float(F fn) {
  return [fn](const Node& n, const std::vector<const Tensor*>& in, std::int64_t) {
    Tensor t = as_float(need(n, in, 0));
    for (auto& x : t.f) x = fn(x);
    return std::vector<Tensor>{std::move(t)};
  };
}

template <typename F>
OpFn unary_keep(F fn) {
  return [fn](const Node& n, const std::vector<const Tensor*>& in, std::int64_t) {
    Tensor t = need(n, in, 0);
    if (t.is_float())
      for (auto& x : t.f) x = fn(x);
    else
      for (auto& x : t.i) x = static_cast<std::int64_t>(fn(static_cast<double>(x)));
    return std::vector<Tensor>{std::move(t)};
  };
}

double int_pow(double a, double b) { return std::pow(a, b); }

// ---------------------------------------------------------------------------
// Individual operators

Tensor op_cast(const Node& n, const Tensor& x) {
  const auto to = n.attr_int("to", -1);
  switch (to) {
    case ::onnx::TensorProto::FLOAT:
    case ::onnx::TensorProto::DOUBLE:
    case ::onnx::TensorProto::FLOAT16:
      return as_float(x);
    case ::onnx::TensorProto::BOOL: {
      std::vector<std::int64_t> v(x.numel());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = x.as_double(k) != 0.0;
      return Tensor::bools(x.shape, std::move(v));
    }
    case ::onnx::TensorProto::INT8:
    case ::onnx::TensorProto::UINT8:
    case ::onnx::TensorProto::INT16:
    case ::onnx::TensorProto::UINT16:
    case ::onnx::TensorProto::INT32:
    case ::onnx::TensorProto::UINT32:
    case ::onnx::TensorProto::INT64:
    case ::onnx::TensorProto::UINT64:
      return Tensor::ints(x.shape, x.int_values());
    default:
      fail(n, "unsupported cast target type " + std::to_string(to));
  }
}

Tensor op_gather(const Node& n, const Tensor& data, const Tensor& indices) {
  const std::size_t axis = norm_axis(n, n.attr_int("axis", 0), data.shape.size());
  const std::int64_t dim = data.shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(data.shape[k]);
  for (std::size_t k = axis + 1; k < data.shape.size(); ++k) inner *= static_cast<std::size_t>(data.shape[k]);
  Shape out(data.shape.begin(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis));
  out.insert(out.end(), indices.shape.begin(), indices.shape.end());
  out.insert(out.end(), data.shape.begin() + static_cast<std::ptrdiff_t>(axis) + 1, data.shape.end());
  const auto idx = indices.int_values();
  Tensor r;
  r.dtype = data.dtype;
  r.shape = out;
  const std::size_t total = outer * idx.size() * inner;
  if (data.is_float()) r.f.resize(total); else r.i.resize(total);
  std::size_t p = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (auto j : idx) {
      if (j < -dim || j >= dim) fail(n, "index " + std::to_string(j) + " out of range [0, " + std::to_string(dim) + ")");
      const std::size_t src = (o * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j < 0 ? j + dim : j)) * inner;
      if (data.is_float()) std::copy_n(data.f.begin() + static_cast<std::ptrdiff_t>(src), inner, r.f.begin() + static_cast<std::ptrdiff_t>(p));
      else std::copy_n(data.i.begin() + static_cast<std::ptrdiff_t>(src), inner, r.i.begin() + static_cast<std::ptrdiff_t>(p));
      p += inner;
    }
  return r;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

Tensor op_gemm(const Node& n, const Tensor& a_in, const Tensor& b_in, const Tensor* c_in) {
  const Tensor a = as_float(a_in), b = as_float(b_in);
  if (a.shape.size() != 2 || b.shape.size() != 2) fail(n, "operands must be 2-D");
  ConstMap am(a.f.data(), a.shape[0], a.shape[1]);
  ConstMap bm(b.f.data(), b.shape[0], b.shape[1]);
  const bool ta = n.attr_int("transA", 0) != 0, tb = n.attr_int("transB", 0) != 0;
  RowMat lhs = ta ? RowMat(am.transpose()) : RowMat(am);
  RowMat rhs = tb ? RowMat(bm.transpose()) : RowMat(bm);
  if (lhs.cols() != rhs.rows()) fail(n, "inner dimensions differ");
  RowMat y = n.attr_float("alpha", 1.0) * (lhs * rhs);
  Shape out{y.rows(), y.cols()};
  std::vector<double> v(y.data(), y.data() + y.size());
  if (c_in != nullptr) {
    const Tensor c = as_float(*c_in);
    const double beta = n.attr_float("beta", 1.0);
    broadcast_shape(n, c.shape, out);
    const auto ic = broadcast_offsets(c.shape, out);
    for (std::size_t p = 0; p < v.size(); ++p) v[p] += beta * c.f[ic[p]];
  }
  return Tensor::floats(out, std::move(v));
}

Tensor op_matmul(const Node& n, const Tensor& a_in, const Tensor& b_in) {
  Tensor a = as_float(a_in), b = as_float(b_in);
  const bool a1 = a.shape.size() == 1, b1 = b.shape.size() == 1;
  if (a1) a.shape.insert(a.shape.begin(), 1);
  if (b1) b.shape.push_back(1);
  if (a.shape.size() < 2 || b.shape.size() < 2) fail(n, "operands must have rank >= 1");
  const std::int64_t m = a.shape[a.shape.size() - 2], k = a.shape.back();
  const std::int64_t k2 = b.shape[b.shape.size() - 2], nn = b.shape.back();
  if (k != k2) fail(n, "inner dimensions differ");
  const Shape ab(a.shape.begin(), a.shape.end() - 2), bb(b.shape.begin(), b.shape.end() - 2);
  const Shape batch = broadcast_shape(n, ab, bb);
  const auto ia = broadcast_offsets(ab, batch), ib = broadcast_offsets(bb, batch);
  std::vector<double> v(ia.size() * static_cast<std::size_t>(m * nn));
  for (std::size_t p = 0; p < ia.size(); ++p) {
    ConstMap am(a.f.data() + ia[p] * static_cast<std::size_t>(m * k), m, k);
    ConstMap bm(b.f.data() + ib[p] * static_cast<std::size_t>(k * nn), k, nn);
    Eigen::Map<RowMat> ym(v.data() + p * static_cast<std::size_t>(m * nn), m, nn);
    ym.noalias() = am * bm;
  }
  Shape out = batch;
  if (!a1) out.push_back(m);
  if (!b1) out.push_back(nn);
  return Tensor::floats(out, std::move(v));
}

Tensor op_layernorm(const Node& n, const Tensor& x_in, const Tensor& scale_in, const Tensor* bias_in) {
  const Tensor x = as_float(x_in);
  const Tensor scale = as_float(scale_in);
  const Tensor bias = bias_in ? as_float(*bias_in) : Tensor();
  const std::size_t axis = norm_axis(n, n.attr_int("axis", -1), x.shape.size());
  const double eps = n.attr_float("epsilon", 1e-5);
  std::size_t inner = 1;
  for (std::size_t k = axis; k < x.shape.size(); ++k) inner *= static_cast<std::size_t>(x.shape[k]);
  if (scale.numel() != inner && scale.numel() != 1) fail(n, "scale shape does not match normalised shape");
  if (bias_in && bias.numel() != inner && bias.numel() != 1) fail(n, "bias shape does not match normalised shape");
  Tensor y = x;
  const std::size_t rows = inner == 0 ? 0 : x.numel() / inner;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.f.data() + r * inner;
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < inner; ++c) mean += row[c];
    mean /= static_cast<double>(inner);
    for (std::size_t c = 0; c < inner; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(inner);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < inner; ++c) {
      double v = (row[c] - mean) * inv * scale.f[scale.numel() == 1 ? 0 : c];
      if (bias_in) v += bias.f[bias.numel() == 1 ? 0 : c];
      row[c] = v;
    }
  }
  return y;
}

Tensor op_softmax(const Node& n, const Tensor& x_in, std::int64_t opset) {
  Tensor y = as_float(x_in);
  const std::size_t rank = y.shape.size();
  const std::size_t axis = norm_axis(n, n.attr_int("axis", opset >= 13 ? -1 : 1), rank);
  // Iterate over (outer, axis, inner) for opset >= 13; older opsets flatten at axis.
  std::size_t outer = 1, len = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(y.shape[k]);
  if (opset >= 13) {
    len = rank ? static_cast<std::size_t>(y.shape[axis]) : 1;
    for (std::size_t k = axis + 1; k < rank; ++k) inner *= static_cast<std::size_t>(y.shape[k]);
  } else {
    for (std::size_t k = axis; k < rank; ++k) len *= static_cast<std::size_t>(y.shape[k]);
  }
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      auto at = [&](std::size_t j) -> double& { return y.f[(o * len + j) * inner + in]; };
      double m = -INFINITY, s = 0;
      for (std::size_t j = 0; j < len; ++j) m = std::max(m, at(j));
      for (std::size_t j = 0; j < len; ++j) s += (at(j) = std::exp(at(j) - m));
      for (std::size_t j = 0; j < len; ++j) at(j) /= s;
    }
  return y;
}

enum class Reduce { Sum, Mean, Max, Min, Prod };

Tensor op_reduce(const Node& n, const std::vector<const Tensor*>& in, Reduce kind) {
  const Tensor& x = need(n, in, 0);
  const std::size_t rank = x.shape.size();
  const bool keep = n.attr_int("keepdims", 1) != 0;
  auto axes = axes_of(n, in, 1);
  std::vector<bool> reduced(rank, false);
  if (!axes || axes->empty()) {
    if (n.attr_int("noop_with_empty_axes", 0) != 0) return x;
    std::fill(reduced.begin(), reduced.end(), true);
  } else {
    for (auto a : *axes) reduced[norm_axis(n, a, rank)] = true;
  }
  Shape out_keep(rank), out;
  for (std::size_t k = 0; k < rank; ++k) {
    out_keep[k] = reduced[k] ? 1 : x.shape[k];
    if (!reduced[k]) out.push_back(x.shape[k]);
    else if (keep) out.push_back(1);
  }
  const std::size_t out_n = shape_numel(out_keep);
  std::vector<double> acc(out_n, kind == Reduce::Max ? -INFINITY : kind == Reduce::Min ? INFINITY
                                                                  : kind == Reduce::Prod ? 1.0 : 0.0);
  std::vector<std::size_t> count(out_n, 0);
  // Map each input position to its output position.
  const Shape st = strides_of(out_keep);
  Shape counter(rank, 0);
  for (std::size_t p = 0; p < x.numel(); ++p) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < rank; ++k)
      if (!reduced[k]) o += static_cast<std::size_t>(counter[k] * st[k]);
    const double v = x.as_double(p);
    switch (kind) {
      case Reduce::Sum:
      case Reduce::Mean: acc[o] += v; break;
      case Reduce::Max: acc[o] = std::max(acc[o], v); break;
      case Reduce::Min: acc[o] = std::min(acc[o], v); break;
      case Reduce::Prod: acc[o] *= v; break;
    }
    ++count[o];
    for (std::size_t k = rank; k-- > 0;) {
      if (++counter[k] < x.shape[k]) break;
      counter[k] = 0;
    }
  }
  if (kind == Reduce::Mean)
    for (std::size_t o = 0; o < out_n; ++o) acc[o] /= static_cast<double>(count[o]);
  if (!x.is_float()) {
    std::vector<std::int64_t> iv(acc.size());
    for (std::size_t o = 0; o < acc.size(); ++o) iv[o] = static_cast<std::int64_t>(acc[o]);
    return Tensor::ints(out, std::move(iv));
  }
  return Tensor::floats(out, std::move(acc));
}

Tensor reshaped(Tensor t, Shape shape) {
  t.shape = std::move(shape);
  return t;
}

Tensor op_reshape(const Node& n, const Tensor& x, const Tensor& shape_t) {
  Shape s = shape_t.int_values();
  const bool allow_zero = n.attr_int("allowzero", 0) != 0;
  std::int64_t known = 1;
  std::optional<std::size_t> infer;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == 0 && !allow_zero) {
      if (k >= x.shape.size()) fail(n, "zero dimension refers past input rank");
      s[k] = x.shape[k];
    }
    if (s[k] == -1) {
      if (infer) fail(n, "more than one inferred dimension");
      infer = k;
    } else {
      known *= s[k];
    }
  }
  const auto total = static_cast<std::int64_t>(x.numel());
  if (infer) {
    if (known == 0 || total % known != 0) fail(n, "cannot infer dimension");
    s[*infer] = total / known;
  }
  if (shape_numel(s) != x.numel()) fail(n, "element count mismatch");
  return reshaped(x, std::move(s));
}

Tensor op_transpose(const Node& n, const Tensor& x) {
  const std::size_t rank = x.shape.size();
  std::vector<std::int64_t> perm(rank);
  if (const Attribute* a = n.attr("perm")) perm = a->ints;
  else for (std::size_t k = 0; k < rank; ++k) perm[k] = static_cast<std::int64_t>(rank - 1 - k);
  if (perm.size() != rank) fail(n, "perm length differs from rank");
  Shape out(rank);
  const Shape st = strides_of(x.shape);
  Shape src_st(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const auto p = norm_axis(n, perm[k], rank);
    out[k] = x.shape[p];
    src_st[k] = st[p];
  }
  Tensor y;
  y.dtype = x.dtype;
  y.shape = out;
  const std::size_t total = x.numel();
  if (x.is_float()) y.f.resize(total); else y.i.resize(total);
  Shape counter(rank, 0);
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t src = 0;
    for (std::size_t k = 0; k < rank; ++k) src += static_cast<std::size_t>(counter[k] * src_st[k]);
    if (x.is_float()) y.f[p] = x.f[src]; else y.i[p] = x.i[src];
    for (std::size_t k = rank; k-- > 0;) {
      if (++counter[k] < out[k]) break;
      counter[k] = 0;
    }
  }
  return y;
}

Tensor op_slice(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = need(n, in, 0);
  const std::size_t rank = x.shape.size();
  const auto starts = need(n, in, 1).int_values();
  const auto ends = need(n, in, 2).int_values();
  std::vector<std::int64_t> axes(starts.size()), steps(starts.size(), 1);
  if (const Tensor* a = opt(in, 3)) axes = a->int_values();
  else std::iota(axes.begin(), axes.end(), 0);
  if (const Tensor* s = opt(in, 4)) steps = s->int_values();
  if (ends.size() != starts.size() || axes.size() != starts.size() || steps.size() != starts.size())
    fail(n, "starts/ends/axes/steps lengths differ");
  Shape begin(rank, 0), step(rank, 1), out = x.shape;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    const std::size_t ax = norm_axis(n, axes[j], rank);
    const std::int64_t dim = x.shape[ax], st = steps[j];
    if (st == 0) fail(n, "step must be non-zero");
    std::int64_t b = starts[j] < 0 ? starts[j] + dim : starts[j];
    std::int64_t e = ends[j] < 0 ? ends[j] + dim : ends[j];
    if (st > 0) {
      b = std::clamp<std::int64_t>(b, 0, dim);
      e = std::clamp<std::int64_t>(e, 0, dim);
    } else {
      b = std::clamp<std::int64_t>(b, 0, dim - 1);
      e = std::clamp<std::int64_t>(e, -1, dim - 1);
    }
    const std::int64_t cnt = st > 0 ? std::max<std::int64_t>(0, (e - b + st - 1) / st)
                                     : std::max<std::int64_t>(0, (b - e + (-st) - 1) / (-st));
    begin[ax] = b;
    step[ax] = st;
    out[ax] = cnt;
  }
  Tensor y;
  y.dtype = x.dtype;
  y.shape = out;
  const std::size_t total = shape_numel(out);
  if (x.is_float()) y.f.resize(total); else y.i.resize(total);
  const Shape st = strides_of(x.shape);
  Shape counter(rank, 0);
  for (std::size_t p = 0; p < total; ++p) {
    std::int64_t src = 0;
    for (std::size_t k = 0; k < rank; ++k) src += (begin[k] + counter[k] * step[k]) * st[k];
    if (x.is_float()) y.f[p] = x.f[static_cast<std::size_t>(src)];
    else y.i[p] = x.i[static_cast<std::size_t>(src)];
    for (std::size_t k = rank; k-- > 0;) {
      if (++counter[k] < out[k]) break;
      counter[k] = 0;
    }
  }
  return y;
}

Tensor op_concat(const Node& n, const std::vector<const Tensor*>& in) {
  std::vector<const Tensor*> parts;
  for (auto* t : in)
    if (t) parts.push_back(t);
  if (parts.empty()) fail(n, "no inputs");
  const std::size_t rank = parts[0]->shape.size();
  const std::size_t axis = norm_axis(n, n.attr_int("axis", 0), rank);
  bool any_float = false;
  for (auto* t : parts) {
    if (t->shape.size() != rank) fail(n, "inputs differ in rank");
    any_float |= t->is_float();
  }
  Shape out = parts[0]->shape;
  out[axis] = 0;
  for (auto* t : parts) out[axis] += t->shape[axis];
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(out[k]);
  Tensor y;
  y.dtype = any_float ? DType::Float : parts[0]->dtype;
  y.shape = out;
  for (std::size_t o = 0; o < outer; ++o)
    for (auto* t : parts) {
      const std::size_t chunk = outer ? t->numel() / outer : 0;
      for (std::size_t c = 0; c < chunk; ++c) {
        if (any_float) y.f.push_back(t->as_double(o * chunk + c));
        else y.i.push_back(t->i[o * chunk + c]);
      }
    }
  return y;
}

Tensor op_expand(const Node& n, const Tensor& x, const Tensor& shape_t) {
  const Shape out = broadcast_shape(n, x.shape, shape_t.int_values());
  const auto idx = broadcast_offsets(x.shape, out);
  Tensor y;
  y.dtype = x.dtype;
  y.shape = out;
  if (x.is_float()) {
    y.f.resize(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) y.f[p] = x.f[idx[p]];
  } else {
    y.i.resize(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) y.i[p] = x.i[idx[p]];
  }
  return y;
}

Tensor op_where(const Node& n, const Tensor& c, const Tensor& a, const Tensor& b) {
  const Shape out = broadcast_shape(n, broadcast_shape(n, c.shape, a.shape), b.shape);
  const auto ic = broadcast_offsets(c.shape, out), ia = broadcast_offsets(a.shape, out),
             ib = broadcast_offsets(b.shape, out);
  if (a.is_float() || b.is_float()) {
    std::vector<double> v(ic.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = c.as_int(ic[p]) ? a.as_double(ia[p]) : b.as_double(ib[p]);
    return Tensor::floats(out, std::move(v));
  }
  std::vector<std::int64_t> v(ic.size());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = c.as_int(ic[p]) ? a.i[ia[p]] : b.i[ib[p]];
  Tensor t = Tensor::ints(out, std::move(v));
  t.dtype = a.dtype;
  return t;
}

Tensor op_cumsum(const Node& n, const Tensor& x, const Tensor& axis_t) {
  const std::size_t rank = x.shape.size();
  const std::size_t axis = norm_axis(n, axis_t.as_int(0), rank);
  const bool exclusive = n.attr_int("exclusive", 0) != 0, reverse = n.attr_int("reverse", 0) != 0;
  std::size_t outer = 1, len = static_cast<std::size_t>(x.shape[axis]), inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(x.shape[k]);
  for (std::size_t k = axis + 1; k < rank; ++k) inner *= static_cast<std::size_t>(x.shape[k]);
  Tensor y = x;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      double acc = 0;
      for (std::size_t s = 0; s < len; ++s) {
        const std::size_t j = reverse ? len - 1 - s : s;
        const std::size_t p = (o * len + j) * inner + in;
        const double v = x.as_double(p);
        if (exclusive) {
          if (y.is_float()) y.f[p] = acc; else y.i[p] = static_cast<std::int64_t>(acc);
          acc += v;
        } else {
          acc += v;
          if (y.is_float()) y.f[p] = acc; else y.i[p] = static_cast<std::int64_t>(acc);
        }
      }
    }
  return y;
}

Tensor op_range(const Tensor& start, const Tensor& limit, const Tensor& delta) {
  if (start.is_float() || limit.is_float() || delta.is_float()) {
    const double s = start.as_double(0), l = limit.as_double(0), d = delta.as_double(0);
    const auto cnt = static_cast<std::int64_t>(std::max(0.0, std::ceil((l - s) / d)));
    std::vector<double> v(static_cast<std::size_t>(cnt));
    for (std::int64_t k = 0; k < cnt; ++k) v[static_cast<std::size_t>(k)] = s + static_cast<double>(k) * d;
    return Tensor::floats({cnt}, std::move(v));
  }
  const std::int64_t s = start.i[0], l = limit.i[0], d = delta.i[0];
  if (d == 0) throw LoadError("Range: delta must be non-zero");
  const std::int64_t cnt = std::max<std::int64_t>(0, (l - s + d + (d > 0 ? -1 : 1)) / d);
  std::vector<std::int64_t> v(static_cast<std::size_t>(cnt));
  for (std::int64_t k = 0; k < cnt; ++k) v[static_cast<std::size_t>(k)] = s + k * d;
  return Tensor::ints({cnt}, std::move(v));
}

Tensor op_unsqueeze(const Node& n, const Tensor& x, const std::vector<std::int64_t>& axes) {
  const std::size_t rank = x.shape.size() + axes.size();
  std::vector<bool> inserted(rank, false);
  for (auto a : axes) {
    const auto k = norm_axis(n, a, rank);
    if (inserted[k]) fail(n, "repeated axis");
    inserted[k] = true;
  }
  Shape out;
  std::size_t src = 0;
  for (std::size_t k = 0; k < rank; ++k) out.push_back(inserted[k] ? 1 : x.shape[src++]);
  return reshaped(x, std::move(out));
}

Tensor op_squeeze(const Node& n, const Tensor& x, const std::optional<std::vector<std::int64_t>>& axes) {
  std::vector<bool> drop(x.shape.size(), false);
  if (axes && !axes->empty()) {
    for (auto a : *axes) {
      const auto k = norm_axis(n, a, x.shape.size());
      if (x.shape[k] != 1) fail(n, "cannot squeeze a dimension of size " + std::to_string(x.shape[k]));
      drop[k] = true;
    }
  } else {
    for (std::size_t k = 0; k < x.shape.size(); ++k) drop[k] = x.shape[k] == 1;
  }
  Shape out;
  for (std::size_t k = 0; k < x.shape.size(); ++k)
    if (!drop[k]) out.push_back(x.shape[k]);
  return reshaped(x, std::move(out));
}

Tensor constant_from(const Node& n) {
  if (const Attribute* a = n.attr("value"); a && !a->tensor.empty()) return a->tensor.front();
  if (const Attribute* a = n.attr("value_float")) return Tensor::floats({}, {a->f});
  if (const Attribute* a = n.attr("value_int")) return Tensor::ints({}, {a->i});
  if (const Attribute* a = n.attr("value_floats"))
    return Tensor::floats({static_cast<std::int64_t>(a->floats.size())}, a->floats);
  if (const Attribute* a = n.attr("value_ints"))
    return Tensor::ints({static_cast<std::int64_t>(a->ints.size())}, a->ints);
  fail(n, "unsupported constant value kind");
}

std::vector<Tensor> one(Tensor t) {
  std::vector<Tensor> v;
  v.push_back(std::move(t));
  return v;
}

const std::unordered_map<std::string, OpFn>& op_table() {
  using In = const std::vector<const Tensor*>&;
  static const std::unordered_map<std::string, OpFn> table = [] {
    std::unordered_map<std::string, OpFn> t;
    auto arith = [&t](const char* name, auto fop, auto iop) {
      t[name] = [fop, iop](const Node& n, In in, std::int64_t) {
        return one(binary(n, need(n, in, 0), need(n, in, 1), fop, iop));
      };
    };
    arith("Add", std::plus<double>(), std::plus<std::int64_t>());
    arith("Sub", std::minus<double>(), std::minus<std::int64_t>());
    arith("Mul", std::multiplies<double>(), std::multiplies<std::int64_t>());
    arith("Div", std::divides<double>(), [](std::int64_t a, std::int64_t b) {
      if (b == 0) throw LoadError("Div: integer division by zero");
      return a / b;
    });
    arith("Pow", int_pow, [](std::int64_t a, std::int64_t b) {
      return static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(a), static_cast<double>(b))));
    });
    arith("And", [](double a, double b) { return double(a != 0 && b != 0); },
          [](std::int64_t a, std::int64_t b) -> std::int64_t { return a && b; });
    arith("Or", [](double a, double b) { return double(a != 0 || b != 0); },
          [](std::int64_t a, std::int64_t b) -> std::int64_t { return a || b; });
    auto cmp = [&t](const char* name, auto c) {
      t[name] = [c](const Node& n, In in, std::int64_t) {
        return one(compare(n, need(n, in, 0), need(n, in, 1), c));
      };
    };
    cmp("Equal", [](auto a, auto b) { return a == b; });
    cmp("Less", [](auto a, auto b) { return a < b; });
    cmp("Greater", [](auto a, auto b) { return a > b; });
    cmp("LessOrEqual", [](auto a, auto b) { return a <= b; });
    cmp("GreaterOrEqual", [](auto a, auto b) { return a >= b; });

    t["Erf"] = unary_float([](double x) { return std::erf(x); });
    t["Sqrt"] = unary_float([](double x) { return std::sqrt(x); });
    t["Tanh"] = unary_float([](double x) { return std::tanh(x); });
    t["Exp"] = unary_float([](double x) { return std::exp(x); });
    t["Log"] = unary_float([](double x) { return std::log(x); });
    t["Reciprocal"] = unary_float([](double x) { return 1.0 / x; });
    t["Sigmoid"] = unary_float([](double x) {
      return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    t["Relu"] = unary_keep([](double x) { return x > 0 ? x : 0.0; });
    t["Neg"] = unary_keep([](double x) { return -x; });
    t["Abs"] = unary_keep([](double x) { return std::fabs(x); });
    t["Floor"] = unary_keep([](double x) { return std::floor(x); });
    t["Ceil"] = unary_keep([](double x) { return std::ceil(x); });
    t["Not"] = [](const Node& n, In in, std::int64_t) {
      Tensor x = need(n, in, 0);
      for (auto& v : x.i) v = v == 0;
      x.dtype = DType::Bool;
      return one(std::move(x));
    };
    auto identity = [](const Node& n, In in, std::int64_t) {
      std::vector<Tensor> out{need(n, in, 0)};
      if (n.outputs.size() > 1) out.push_back(Tensor::bools(out[0].shape, std::vector<std::int64_t>(out[0].numel(), 1)));
      return out;
    };
    t["Identity"] = identity;
    t["Dropout"] = identity;
    t["Cast"] = [](const Node& n, In in, std::int64_t) { return one(op_cast(n, need(n, in, 0))); };
    t["Clip"] = [](const Node& n, In in, std::int64_t) {
      Tensor x = need(n, in, 0);
      double lo = n.attr_float("min", -INFINITY), hi = n.attr_float("max", INFINITY);
      if (const Tensor* m = opt(in, 1)) lo = m->as_double(0);
      if (const Tensor* m = opt(in, 2)) hi = m->as_double(0);
      if (x.is_float()) for (auto& v : x.f) v = std::min(std::max(v, lo), hi);
      else for (auto& v : x.i) v = static_cast<std::int64_t>(std::min(std::max(static_cast<double>(v), lo), hi));
      return one(std::move(x));
    };
    t["Where"] = [](const Node& n, In in, std::int64_t) {
      return one(op_where(n, need(n, in, 0), need(n, in, 1), need(n, in, 2)));
    };
    t["Gather"] = [](const Node& n, In in, std::int64_t) { return one(op_gather(n, need(n, in, 0), need(n, in, 1))); };
    t["Gemm"] = [](const Node& n, In in, std::int64_t) { return one(op_gemm(n, need(n, in, 0), need(n, in, 1), opt(in, 2))); };
    t["MatMul"] = [](const Node& n, In in, std::int64_t) { return one(op_matmul(n, need(n, in, 0), need(n, in, 1))); };
    t["LayerNormalization"] = [](const Node& n, In in, std::int64_t) {
      if (n.outputs.size() > 1)
        for (std::size_t k = 1; k < n.outputs.size(); ++k)
          if (!n.outputs[k].empty()) fail(n, "mean/inv-std outputs are unsupported");
      return one(op_layernorm(n, need(n, in, 0), need(n, in, 1), opt(in, 2)));
    };
    t["Softmax"] = [](const Node& n, In in, std::int64_t opset) { return one(op_softmax(n, need(n, in, 0), opset)); };
    t["ReduceSum"] = [](const Node& n, In in, std::int64_t) { return one(op_reduce(n, in, Reduce::Sum)); };
    t["ReduceMean"] = [](const Node& n, In in, std::int64_t) { return one(op_reduce(n, in, Reduce::Mean)); };
    t["ReduceMax"] = [](const Node& n, In in, std::int64_t) { return one(op_reduce(n, in, Reduce::Max)); };
    t["ReduceMin"] = [](const Node& n, In in, std::int64_t) { return one(op_reduce(n, in, Reduce::Min)); };
    t["ReduceProd"] = [](const Node& n, In in, std::int64_t) { return one(op_reduce(n, in, Reduce::Prod)); };
    t["Unsqueeze"] = [](const Node& n, In in, std::int64_t) {
      auto axes = axes_of(n, in, 1);
      if (!axes) fail(n, "axes are required");
      return one(op_unsqueeze(n, need(n, in, 0), *axes));
    };
    t["Squeeze"] = [](const Node& n, In in, std::int64_t) { return one(op_squeeze(n, need(n, in, 0), axes_of(n, in, 1))); };
    t["Shape"] = [](const Node& n, In in, std::int64_t) {
      const Shape& s = need(n, in, 0).shape;
      const auto r = static_cast<std::int64_t>(s.size());
      auto clampi = [r](std::int64_t v) { return std::clamp<std::int64_t>(v < 0 ? v + r : v, 0, r); };
      const std::int64_t b = clampi(n.attr_int("start", 0)), e = clampi(n.attr_int("end", r));
      Shape v(s.begin() + b, s.begin() + std::max(b, e));
      const auto len = static_cast<std::int64_t>(v.size());
      return one(Tensor::ints({len}, std::move(v)));
    };
    t["Size"] = [](const Node& n, In in, std::int64_t) {
      return one(Tensor::ints({}, {static_cast<std::int64_t>(need(n, in, 0).numel())}));
    };
    t["Concat"] = [](const Node& n, In in, std::int64_t) { return one(op_concat(n, in)); };
    t["Reshape"] = [](const Node& n, In in, std::int64_t) { return one(op_reshape(n, need(n, in, 0), need(n, in, 1))); };
    t["Flatten"] = [](const Node& n, In in, std::int64_t) {
      const Tensor& x = need(n, in, 0);
      const std::size_t axis = norm_axis(n, n.attr_int("axis", 1), x.shape.size() + 1);
      std::int64_t a = 1;
      for (std::size_t k = 0; k < axis; ++k) a *= x.shape[k];
      return one(reshaped(x, {a, a == 0 ? 0 : static_cast<std::int64_t>(x.numel()) / a}));
    };
    t["Expand"] = [](const Node& n, In in, std::int64_t) { return one(op_expand(n, need(n, in, 0), need(n, in, 1))); };
    t["Transpose"] = [](const Node& n, In in, std::int64_t) { return one(op_transpose(n, need(n, in, 0))); };
    t["Slice"] = [](const Node& n, In in, std::int64_t) { return one(op_slice(n, in)); };
    t["ConstantOfShape"] = [](const Node& n, In in, std::int64_t) {
      const Shape s = need(n, in, 0).int_values();
      Tensor fill = Tensor::floats({1}, {0.0});
      if (const Attribute* a = n.attr("value"); a && !a->tensor.empty()) fill = a->tensor.front();
      Tensor y;
      y.dtype = fill.dtype;
      y.shape = s;
      if (fill.is_float()) y.f.assign(shape_numel(s), fill.f.at(0));
      else y.i.assign(shape_numel(s), fill.i.at(0));
      return one(std::move(y));
    };
    t["Range"] = [](const Node& n, In in, std::int64_t) {
      return one(op_range(need(n, in, 0), need(n, in, 1), need(n, in, 2)));
    };
    t["CumSum"] = [](const Node& n, In in, std::int64_t) { return one(op_cumsum(n, need(n, in, 0), need(n, in, 1))); };
    t["Constant"] = [](const Node& n, In, std::int64_t) { return one(constant_from(n)); };
    return t;
  }();
  return table;
}

// ---------------------------------------------------------------------------
// Protobuf conversion

double half_to_double(std::uint16_t h) {
  const int sign = (h >> 15) & 1, exp = (h >> 10) & 0x1f, mant = h & 0x3ff;
  double v;
  if (exp == 0) v = std::ldexp(mant, -24);
  else if (exp == 31) v = mant ? NAN : INFINITY;
  else v = std::ldexp(mant + 1024, exp - 25);
  return sign ? -v : v;
}

template <typename T>
std::vector<T> raw_values(const std::string& raw, const std::string& name) {
  if (raw.size() % sizeof(T) != 0) throw LoadError("tensor '" + name + "' has truncated raw data");
  std::vector<T> v(raw.size() / sizeof(T));
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

Tensor convert_tensor(const ::onnx::TensorProto& p) {
  const std::string& name = p.name();
  if (p.data_location() == ::onnx::TensorProto::EXTERNAL || p.external_data_size() > 0)
    throw LoadError("tensor '" + name + "' uses external data, which is unsupported");
  Shape shape(p.dims().begin(), p.dims().end());
  const std::size_t n = shape_numel(shape);
  const bool raw = p.has_raw_data();
  const std::string& rd = p.raw_data();
  Tensor t;
  t.shape = shape;
  auto ints_from = [&](auto vec, DType kind) {
    t.dtype = kind;
    t.i.assign(vec.begin(), vec.end());
  };
  switch (p.data_type()) {
    case ::onnx::TensorProto::FLOAT:
      t.dtype = DType::Float;
      if (raw) { auto v = raw_values<float>(rd, name); t.f.assign(v.begin(), v.end()); }
      else t.f.assign(p.float_data().begin(), p.float_data().end());
      break;
    case ::onnx::TensorProto::DOUBLE:
      t.dtype = DType::Float;
      if (raw) t.f = raw_values<double>(rd, name);
      else t.f.assign(p.double_data().begin(), p.double_data().end());
      break;
    case ::onnx::TensorProto::FLOAT16: {
      t.dtype = DType::Float;
      std::vector<std::uint16_t> bits;
      if (raw) bits = raw_values<std::uint16_t>(rd, name);
      else for (auto b : p.int32_data()) bits.push_back(static_cast<std::uint16_t>(b));
      for (auto b : bits) t.f.push_back(half_to_double(b));
      break;
    }
    case ::onnx::TensorProto::INT64:
      if (raw) ints_from(raw_values<std::int64_t>(rd, name), DType::Int);
      else ints_from(p.int64_data(), DType::Int);
      break;
    case ::onnx::TensorProto::INT32:
      if (raw) ints_from(raw_values<std::int32_t>(rd, name), DType::Int);
      else ints_from(p.int32_data(), DType::Int);
      break;
    case ::onnx::TensorProto::INT16:
      if (raw) ints_from(raw_values<std::int16_t>(rd, name), DType::Int);
      else ints_from(p.int32_data(), DType::Int);
      break;
    case ::onnx::TensorProto::UINT16:
      if (raw) ints_from(raw_values<std::uint16_t>(rd, name), DType::Int);
      else ints_from(p.int32_data(), DType::Int);
      break;
    case ::onnx::TensorProto::INT8:
      if (raw) ints_from(raw_values<std::int8_t>(rd, name), DType::Int);
      else ints_from(p.int32_data(), DType::Int);
      break;
    case ::onnx::TensorProto::UINT8:
      if (raw) ints_from(raw_values<std::uint8_t>(rd, name), DType::Int);
      else ints_from(p.int32_data(), DType::Int);
      break;
    case ::onnx::TensorProto::BOOL:
      if (raw) ints_from(raw_values<std::uint8_t>(rd, name), DType::Bool);
      else ints_from(p.int32_data(), DType::Bool);
      break;
    default:
      throw LoadError("tensor '" + name + "' has unsupported element type " + std::to_string(p.data_type()));
  }
  const std::size_t have = t.is_float() ? t.f.size() : t.i.size();
  if (have != n)
    throw LoadError("tensor '" + name + "' holds " + std::to_string(have) + " values, shape needs " + std::to_string(n));
  return t;
}

std::optional<DType> convert_elem_type(int32_t e) {
  switch (e) {
    case ::onnx::TensorProto::FLOAT:
    case ::onnx::TensorProto::DOUBLE:
    case ::onnx::TensorProto::FLOAT16: return DType::Float;
    case ::onnx::TensorProto::BOOL: return DType::Bool;
    case ::onnx::TensorProto::INT8:
    case ::onnx::TensorProto::UINT8:
    case ::onnx::TensorProto::INT16:
    case ::onnx::TensorProto::UINT16:
    case ::onnx::TensorProto::INT32:
    case ::onnx::TensorProto::UINT32:
    case ::onnx::TensorProto::INT64:
    case ::onnx::TensorProto::UINT64: return DType::Int;
    default: return std::nullopt;
  }
}

ValueInfo convert_value_info(const ::onnx::ValueInfoProto& v) {
  ValueInfo info;
  info.name = v.name();
  if (v.has_type() && v.type().has_tensor_type()) {
    const auto& tt = v.type().tensor_type();
    info.dtype = convert_elem_type(tt.elem_type());
    if (tt.has_shape()) {
      info.has_shape = true;
      for (const auto& d : tt.shape().dim())
        info.dims.push_back(d.has_dim_value() ? std::optional<std::int64_t>(d.dim_value()) : std::nullopt);
    }
  }
  return info;
}

Attribute convert_attribute(const ::onnx::AttributeProto& a, const std::string& node) {
  Attribute out;
  using A = ::onnx::AttributeProto;
  switch (a.type()) {
    case A::FLOAT: out.kind = Attribute::Kind::Float; out.f = a.f(); break;
    case A::INT: out.kind = Attribute::Kind::Int; out.i = a.i(); out.f = static_cast<double>(a.i()); break;
    case A::STRING: out.kind = Attribute::Kind::String; out.s = a.s(); break;
    case A::TENSOR: out.kind = Attribute::Kind::Tensor; out.tensor.push_back(convert_tensor(a.t())); break;
    case A::FLOATS: out.kind = Attribute::Kind::Floats; out.floats.assign(a.floats().begin(), a.floats().end()); break;
    case A::INTS: out.kind = Attribute::Kind::Ints; out.ints.assign(a.ints().begin(), a.ints().end()); break;
    case A::STRINGS: out.kind = Attribute::Kind::Strings; out.strings.assign(a.strings().begin(), a.strings().end()); break;
    default:
      throw LoadError("node '" + node + "': attribute '" + a.name() + "' has unsupported type");
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

const std::set<std::string>& Graph::supported_ops() {
  static const std::set<std::string> ops = [] {
    std::set<std::string> s;
    for (const auto& [name, fn] : op_table()) s.insert(name);
    return s;
  }();
  return ops;
}

Graph Graph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing model graph: '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const LoadError& e) {
    throw LoadError(path.filename().string() + ": " + e.what());
  }
}

Graph Graph::parse(std::string_view bytes) {
  ::onnx::ModelProto model;
  if (bytes.size() > static_cast<std::size_t>(std::numeric_limits<int>::max()))
    throw LoadError("model exceeds 2 GiB; external data is unsupported");
  if (!model.ParseFromArray(bytes.data(), static_cast<int>(bytes.size())))
    throw LoadError("not a valid ONNX model protobuf");
  Graph g;
  for (const auto& op : model.opset_import())
    if (op.domain().empty() || op.domain() == "ai.onnx") g.opset_ = op.version();
  if (g.opset_ == 0) throw LoadError("model does not import the default ONNX opset");

  const auto& graph = model.graph();
  for (const auto& init : graph.initializer()) g.initializers_[init.name()] = convert_tensor(init);
  if (graph.sparse_initializer_size() > 0) throw LoadError("sparse initializers are unsupported");

  std::set<std::string> available;
  for (const auto& [name, t] : g.initializers_) available.insert(name);
  for (const auto& v : graph.input()) {
    if (g.initializers_.count(v.name())) continue;
    g.inputs_.push_back(convert_value_info(v));
    available.insert(v.name());
  }
  const auto& table = op_table();
  for (const auto& np : graph.node()) {
    Node n;
    n.name = np.name().empty() ? np.op_type() + "#" + std::to_string(g.nodes_.size()) : np.name();
    n.op = np.op_type();
    if (!np.domain().empty() && np.domain() != "ai.onnx")
      throw LoadError("unsupported operator '" + np.domain() + "::" + n.op + "' (node '" + n.name + "')");
    if (!table.count(n.op)) throw LoadError("unsupported operator '" + n.op + "' (node '" + n.name + "')");
    n.inputs.assign(np.input().begin(), np.input().end());
    n.outputs.assign(np.output().begin(), np.output().end());
    for (const auto& a : np.attribute()) n.attributes[a.name()] = convert_attribute(a, n.name);
    for (const auto& i : n.inputs)
      if (!i.empty() && !available.count(i))
        throw LoadError("node '" + n.name + "' reads '" + i + "' before it is produced");
    for (const auto& o : n.outputs)
      if (!o.empty()) available.insert(o);
    g.nodes_.push_back(std::move(n));
  }
  for (const auto& v : graph.output()) {
    if (!available.count(v.name())) throw LoadError("graph output '" + v.name() + "' is never produced");
    g.outputs_.push_back(convert_value_info(v));
  }
  return g;
}

std::map<std::string, Tensor> Graph::run(const std::map<std::string, Tensor>& feeds) const {
  std::unordered_map<std::string, Tensor> values;
  for (const auto& in : inputs_) {
    auto it = feeds.find(in.name);
    if (it == feeds.end()) throw ArgumentError("missing graph input '" + in.name + "'");
    values[in.name] = it->second;
  }
  // Last node index reading each value, so intermediates can be released.
  std::unordered_map<std::string, std::size_t> last_use;
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    for (const auto& i : nodes_[k].inputs) last_use[i] = k;
  std::set<std::string> keep;
  for (const auto& o : outputs_) keep.insert(o.name);

  const auto& table = op_table();
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    std::vector<const Tensor*> args;
    for (const auto& i : n.inputs) {
      if (i.empty()) { args.push_back(nullptr); continue; }
      if (auto it = values.find(i); it != values.end()) args.push_back(&it->second);
      else if (auto jt = initializers_.find(i); jt != initializers_.end()) args.push_back(&jt->second);
      else fail(n, "input '" + i + "' is unavailable");
    }
    auto results = table.at(n.op)(n, args, opset_);
    for (std::size_t j = 0; j < n.outputs.size() && j < results.size(); ++j)
      if (!n.outputs[j].empty()) values[n.outputs[j]] = std::move(results[j]);
    for (const auto& i : n.inputs)
      if (!i.empty() && last_use[i] == k && !keep.count(i)) values.erase(i);
  }
  std::map<std::string, Tensor> out;
  for (const auto& o : outputs_) out[o.name] = values.at(o.name);
  return out;
}

}  // namespace debtlens::onnx
