#pragma once

// Differentiable primitives. Binary elementwise ops accept equal shapes or
// an operand whose shape is a trailing suffix of the other's (repeated over
// the leading axes); anything else needs an explicit reshape.

#include <cmath>
#include <string>
#include <vector>

#include "mftraj/ad/tensor.hpp"

namespace mftraj::ad {

namespace detail {

template <typename Scalar>
using Mat = RowMatrix<Scalar>;

template <typename Scalar>
Eigen::Map<const Mat<Scalar>> view(const Vector<Scalar>& v, Index rows, Index cols) {
  return Eigen::Map<const Mat<Scalar>>(v.data(), rows, cols);
}

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct Broadcast {
  Shape shape;
  Index outer = 1;
  Index inner = 1;
  int small = 0;  // 0: equal shapes, 1: first operand repeats, 2: second repeats
};

inline Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.shape = a;
    plan.inner = shape_size(a);
  } else if (b.size() < a.size() && is_suffix(b, a)) {
    plan = {a, shape_size(a) / shape_size(b), shape_size(b), 2};
  } else if (a.size() < b.size() && is_suffix(a, b)) {
    plan = {b, shape_size(b) / shape_size(a), shape_size(a), 1};
  } else {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
  }
  return plan;
}

template <typename Scalar>
Vector<Scalar> expand(const Vector<Scalar>& small, Index outer) {
  return small.replicate(outer, 1);
}

template <typename Scalar>
Vector<Scalar> reduce(const Vector<Scalar>& full, Index outer, Index inner) {
  return view(full, outer, inner).colwise().sum().transpose();
}

/// Shared skeleton of the elementwise binary ops. `forward(a, b)` and the
/// partials `da(g, a, b)`, `db(g, a, b)` act on full-size arrays.
template <typename Scalar, typename Forward, typename DA, typename DB>
Tensor<Scalar> binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* name, Forward forward, DA da,
                      DB db) {
  const Broadcast plan = broadcast(a.shape(), b.shape(), name);
  Vector<Scalar> av = plan.small == 1 ? expand(a.values(), plan.outer) : a.values();
  Vector<Scalar> bv = plan.small == 2 ? expand(b.values(), plan.outer) : b.values();
  Vector<Scalar> out = forward(av.array(), bv.array()).matrix();
  auto an = a.node(), bn = b.node();
  return make_result<Scalar>(
      plan.shape, std::move(out), {&a, &b},
      [an, bn, plan, av = std::move(av), bv = std::move(bv), da, db](Node<Scalar>& self) {
        const auto g = self.grad.array();
        if (an->requires_grad) {
          Vector<Scalar> ga = da(g, av.array(), bv.array()).matrix();
          an->accumulate(plan.small == 1 ? reduce(ga, plan.outer, plan.inner) : ga);
        }
        if (bn->requires_grad) {
          Vector<Scalar> gb = db(g, av.array(), bv.array()).matrix();
          bn->accumulate(plan.small == 2 ? reduce(gb, plan.outer, plan.inner) : gb);
        }
      });
}

/// Elementwise unary op; `derivative(x, y)` returns dy/dx as an array.
template <typename Scalar, typename Forward, typename Derivative>
Tensor<Scalar> unary(const Tensor<Scalar>& x, Forward forward, Derivative derivative) {
  Vector<Scalar> y = forward(x.values().array()).matrix();
  auto xn = x.node();
  auto yv = std::make_shared<Vector<Scalar>>(y);
  return make_result<Scalar>(x.shape(), std::move(y), {&x}, [xn, yv, derivative](Node<Scalar>& self) {
    xn->accumulate((self.grad.array() * derivative(xn->value->array(), yv->array())).matrix());
  });
}

/// (outer, extent, inner) factorisation of a shape around `axis`.
inline std::array<Index, 3> split_axis(const Shape& shape, Index axis, const char* op) {
  if (axis < 0 || axis >= static_cast<Index>(shape.size()))
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) inner *= shape[static_cast<std::size_t>(i)];
  return {outer, shape[static_cast<std::size_t>(axis)], inner};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "add", [](const auto& x, const auto& y) { return x + y; }, [](const auto& g, const auto&, const auto&) { return g; },
      [](const auto& g, const auto&, const auto&) { return g; });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "sub", [](const auto& x, const auto& y) { return x - y; }, [](const auto& g, const auto&, const auto&) { return g; },
      [](const auto& g, const auto&, const auto&) { return -g; });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary(
      a, b, "mul", [](const auto& x, const auto& y) { return x * y; },
      [](const auto& g, const auto&, const auto& y) { return g * y; },
      [](const auto& g, const auto& x, const auto&) { return g * x; });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar factor) {
  return detail::unary(
      x, [factor](const auto& v) { return v * factor; },
      [factor](const auto& v, const auto&) { return decltype(v.eval())::Constant(v.size(), factor); });
}

/// 1 - x.
template <typename Scalar>
Tensor<Scalar> one_minus(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return Scalar(1) - v; },
      [](const auto& v, const auto&) { return decltype(v.eval())::Constant(v.size(), Scalar(-1)); });
}

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  detail::Mat<Scalar> c = a.matrix() * b.matrix();
  Vector<Scalar> out = Eigen::Map<const Vector<Scalar>>(c.data(), c.size());
  auto an = a.node(), bn = b.node();
  return detail::make_result<Scalar>(Shape{m, n}, std::move(out), {&a, &b}, [an, bn, m, k, n](Node<Scalar>& self) {
    const auto g = detail::view(self.grad, m, n);
    if (an->requires_grad) {
      detail::Mat<Scalar> ga = g * detail::view(*bn->value, k, n).transpose();
      an->accumulate(ga);
    }
    if (bn->requires_grad) {
      detail::Mat<Scalar> gb = detail::view(*an->value, m, k).transpose() * g;
      bn->accumulate(gb);
    }
  });
}

// ---------------------------------------------------------------------------
// Structure

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(shape), x.values(), {&x},
                                     [xn](Node<Scalar>& self) { xn->accumulate(self.grad); });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_string(x.shape()));
  const Index r = x.dim(0), c = x.dim(1);
  detail::Mat<Scalar> t = x.matrix().transpose();
  Vector<Scalar> out = Eigen::Map<const Vector<Scalar>>(t.data(), t.size());
  auto xn = x.node();
  return detail::make_result<Scalar>(Shape{c, r}, std::move(out), {&x}, [xn, r, c](Node<Scalar>& self) {
    detail::Mat<Scalar> g = detail::view(self.grad, c, r).transpose();
    xn->accumulate(g);
  });
}

template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, Index axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto [outer, first_extent, inner] = detail::split_axis(first, axis, "concat");
  (void)first_extent;
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = 0;
  std::vector<Index> chunk;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) throw ShapeError("concat: rank mismatch " + shape_string(first) + " vs " + shape_string(probe));
    const Index extent = probe[static_cast<std::size_t>(axis)];
    probe[static_cast<std::size_t>(axis)] = first[static_cast<std::size_t>(axis)];
    if (probe != first) throw ShapeError("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(p.shape()));
    out_shape[static_cast<std::size_t>(axis)] += extent;
    chunk.push_back(extent * inner);
  }
  const Index row = out_shape[static_cast<std::size_t>(axis)] * inner;
  Vector<Scalar> out(outer * row);
  Index offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Vector<Scalar>& v = parts[p].values();
    for (Index o = 0; o < outer; ++o) out.segment(o * row + offset, chunk[p]) = v.segment(o * chunk[p], chunk[p]);
    offset += chunk[p];
  }
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result_n<Scalar>(std::move(out_shape), std::move(out), parts,
                                       [nodes, chunk, outer = outer, row](Node<Scalar>& self) {
                                         Index off = 0;
                                         for (std::size_t p = 0; p < nodes.size(); ++p) {
                                           if (nodes[p]->requires_grad) {
                                             Vector<Scalar> g(outer * chunk[p]);
                                             for (Index o = 0; o < outer; ++o)
                                               g.segment(o * chunk[p], chunk[p]) = self.grad.segment(o * row + off, chunk[p]);
                                             nodes[p]->accumulate(g);
                                           }
                                           off += chunk[p];
                                         }
                                       });
}

template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& x, Index axis, Index start, Index length) {
  const auto [outer, extent, inner] = detail::split_axis(x.shape(), axis, "slice");
  if (start < 0 || length < 0 || start + length > extent)
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of " + shape_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = length;
  const Index row = extent * inner, piece = length * inner, skip = start * inner;
  Vector<Scalar> out(outer * piece);
  for (Index o = 0; o < outer; ++o) out.segment(o * piece, piece) = x.values().segment(o * row + skip, piece);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(out_shape), std::move(out), {&x},
                                     [xn, outer = outer, row, piece, skip](Node<Scalar>& self) {
                                       Vector<Scalar> g = Vector<Scalar>::Zero(outer * row);
                                       for (Index o = 0; o < outer; ++o)
                                         g.segment(o * row + skip, piece) = self.grad.segment(o * piece, piece);
                                       xn->accumulate(g);
                                     });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  auto xn = x.node();
  const Index n = x.size();
  return detail::make_result<Scalar>(Shape{}, Vector<Scalar>::Constant(1, x.values().sum()), {&x},
                                     [xn, n](Node<Scalar>& self) { xn->accumulate(Vector<Scalar>::Constant(n, self.grad[0])); });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.size()));
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x, Index axis) {
  const auto [outer, extent, inner] = detail::split_axis(x.shape(), axis, "sum");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  Vector<Scalar> out = Vector<Scalar>::Zero(outer * inner);
  for (Index o = 0; o < outer; ++o)
    for (Index e = 0; e < extent; ++e) out.segment(o * inner, inner) += x.values().segment((o * extent + e) * inner, inner);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(out_shape), std::move(out), {&x},
                                     [xn, outer = outer, extent = extent, inner = inner](Node<Scalar>& self) {
                                       Vector<Scalar> g(outer * extent * inner);
                                       for (Index o = 0; o < outer; ++o)
                                         for (Index e = 0; e < extent; ++e)
                                           g.segment((o * extent + e) * inner, inner) = self.grad.segment(o * inner, inner);
                                       xn->accumulate(g);
                                     });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x, Index axis) {
  const Index extent = detail::split_axis(x.shape(), axis, "mean")[1];
  return scale(sum(x, axis), Scalar(1) / static_cast<Scalar>(extent));
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return Scalar(1) / (Scalar(1) + (-v).exp()); },
      [](const auto&, const auto& y) { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return detail::unary(
      x, [](const auto& v) { return v.max(Scalar(0)) + (-v.abs()).exp().log1p(); },
      [](const auto& v, const auto&) { return Scalar(1) / (Scalar(1) + (-v).exp()); });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.tanh(); }, [](const auto&, const auto& y) { return Scalar(1) - y * y; });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.max(Scalar(0)); },
      [](const auto& v, const auto&) { return (v > Scalar(0)).template cast<Scalar>(); });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.exp(); }, [](const auto&, const auto& y) { return y; });
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.log(); }, [](const auto& v, const auto&) { return v.inverse(); });
}

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, Index axis) {
  const auto [outer, extent, inner] = detail::split_axis(x.shape(), axis, "softmax");
  const Vector<Scalar>& v = x.values();
  auto y = std::make_shared<Vector<Scalar>>(v.size());
  for (Index o = 0; o < outer; ++o) {
    for (Index i = 0; i < inner; ++i) {
      const Index base = o * extent * inner + i;
      Scalar top = v[base];
      for (Index e = 1; e < extent; ++e) top = std::max(top, v[base + e * inner]);
      Scalar total = 0;
      for (Index e = 0; e < extent; ++e) total += ((*y)[base + e * inner] = std::exp(v[base + e * inner] - top));
      for (Index e = 0; e < extent; ++e) (*y)[base + e * inner] /= total;
    }
  }
  auto xn = x.node();
  return detail::make_result<Scalar>(x.shape(), *y, {&x},
                                     [xn, y, outer = outer, extent = extent, inner = inner](Node<Scalar>& self) {
                                       Vector<Scalar> g(y->size());
                                       for (Index o = 0; o < outer; ++o) {
                                         for (Index i = 0; i < inner; ++i) {
                                           const Index base = o * extent * inner + i;
                                           Scalar dot = 0;
                                           for (Index e = 0; e < extent; ++e)
                                             dot += self.grad[base + e * inner] * (*y)[base + e * inner];
                                           for (Index e = 0; e < extent; ++e)
                                             g[base + e * inner] = (*y)[base + e * inner] * (self.grad[base + e * inner] - dot);
                                         }
                                       }
                                       xn->accumulate(g);
                                     });
}

/// Group normalization over the last axis (channels), every leading index
/// treated as an independent sample; gamma and beta have shape [channels].
template <typename Scalar>
Tensor<Scalar> group_norm(const Tensor<Scalar>& x, Index groups, Scalar eps, const Tensor<Scalar>& gamma,
                          const Tensor<Scalar>& beta) {
  if (x.rank() < 1) throw ShapeError("group_norm: needs at least one axis");
  const Index channels = x.shape().back();
  if (groups < 1 || channels % groups != 0)
    throw ConfigError("group_norm: " + std::to_string(groups) + " groups do not divide " + std::to_string(channels) +
                      " channels");
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels})
    throw ShapeError("group_norm: affine parameters must have shape [" + std::to_string(channels) + "], got " +
                     shape_string(gamma.shape()) + " and " + shape_string(beta.shape()));
  const Index rows = x.size() / channels, width = channels / groups, blocks = rows * groups;
  const auto xv = detail::view(x.values(), blocks, width);
  Vector<Scalar> inv_std(blocks);
  detail::Mat<Scalar> xhat(blocks, width);
  for (Index b = 0; b < blocks; ++b) {
    const Scalar mu = xv.row(b).mean();
    const Scalar var = (xv.row(b).array() - mu).square().mean();
    inv_std[b] = Scalar(1) / std::sqrt(var + eps);
    xhat.row(b) = (xv.row(b).array() - mu) * inv_std[b];
  }
  const auto xhat_rows = Eigen::Map<const detail::Mat<Scalar>>(xhat.data(), rows, channels);
  detail::Mat<Scalar> y = (xhat_rows.array().rowwise() * gamma.values().transpose().array()).rowwise() +
                          beta.values().transpose().array();
  Vector<Scalar> out = Eigen::Map<const Vector<Scalar>>(y.data(), y.size());
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  auto saved = std::make_shared<detail::Mat<Scalar>>(std::move(xhat));
  return detail::make_result<Scalar>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [xn, gn, bn, saved, inv_std, rows, channels, blocks, width](Node<Scalar>& self) {
        const auto g = detail::view(self.grad, rows, channels);
        const auto xhat_rc = Eigen::Map<const detail::Mat<Scalar>>(saved->data(), rows, channels);
        if (gn->requires_grad) gn->accumulate((g.array() * xhat_rc.array()).colwise().sum().transpose().matrix());
        if (bn->requires_grad) bn->accumulate(g.colwise().sum().transpose());
        if (xn->requires_grad) {
          detail::Mat<Scalar> dxhat_rc = g.array().rowwise() * gn->value->transpose().array();
          const auto dxhat = Eigen::Map<const detail::Mat<Scalar>>(dxhat_rc.data(), blocks, width);
          detail::Mat<Scalar> dx(blocks, width);
          for (Index b = 0; b < blocks; ++b) {
            const Scalar m1 = dxhat.row(b).mean();
            const Scalar m2 = (dxhat.row(b).array() * saved->row(b).array()).mean();
            dx.row(b) = (dxhat.row(b).array() - m1 - saved->row(b).array() * m2) * inv_std[b];
          }
          xn->accumulate(dx);
        }
      });
}

/// Elementwise Huber-style loss: 0.5 d^2 / beta for |d| < beta, |d| - beta / 2 otherwise.
template <typename Scalar>
Tensor<Scalar> smooth_l1(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar beta = Scalar(1)) {
  if (pred.shape() != target.shape())
    throw ShapeError("smooth_l1: shape mismatch " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  if (!(beta > Scalar(0))) throw ConfigError("smooth_l1: beta must be positive");
  return detail::binary(
      pred, target, "smooth_l1",
      [beta](const auto& p, const auto& t) {
        const auto d = (p - t).eval();
        return (d.abs() < beta).select(Scalar(0.5) * d.square() / beta, d.abs() - Scalar(0.5) * beta).eval();
      },
      [beta](const auto& g, const auto& p, const auto& t) {
        const auto d = (p - t).eval();
        return (g * (d.abs() < beta).select(d / beta, d.sign())).eval();
      },
      [beta](const auto& g, const auto& p, const auto& t) {
        const auto d = (p - t).eval();
        return (-g * (d.abs() < beta).select(d / beta, d.sign())).eval();
      });
}

/// Reparameterized draw mu + exp(logvar / 2) * noise; `noise` is treated as
/// a constant.
template <typename Scalar>
Tensor<Scalar> gaussian_sample(const Tensor<Scalar>& mu, const Tensor<Scalar>& logvar, const Tensor<Scalar>& noise) {
  if (mu.shape() != logvar.shape() || mu.shape() != noise.shape())
    throw ShapeError("gaussian_sample: shapes " + shape_string(mu.shape()) + ", " + shape_string(logvar.shape()) +
                     ", " + shape_string(noise.shape()) + " differ");
  return add(mu, mul(exp(scale(logvar, Scalar(0.5))), noise.detach()));
}

}  // namespace mftraj::ad
