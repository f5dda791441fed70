#pragma once

// Differentiable primitives. Each op computes its forward value eagerly and,
// when any input is tracked, records a closure that pushes the output grad
// back into its parents.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dkt/tensor.hpp"

namespace dkt {

namespace fault {
// Name of an op whose backward rule is deliberately scaled by 1.5. Used only
// by the gradient checker's negative control.
inline std::string corrupted_backward;
inline bool is_corrupted(const char* op) { return !corrupted_backward.empty() && corrupted_backward == op; }
}  // namespace fault

namespace detail {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

inline std::size_t norm_axis(int axis, std::size_t rank) {
  int r = static_cast<int>(rank);
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return static_cast<std::size_t>(a);
}

// outer x axis x inner decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};
inline AxisSplit split_at(const Shape& s, std::size_t a) {
  AxisSplit r;
  for (std::size_t i = 0; i < a; ++i) r.outer *= s[i];
  r.axis = s[a];
  for (std::size_t i = a + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <class T>
void add_into(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// true when `suffix` equals the trailing dims of `full`.
inline bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul

/// [...,m,k] x [...,k,n]. Batch dims must match, or one side may be a plain
/// matrix broadcast over the other's batch.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2 || a.dim(-1) != b.dim(-2))
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  if (batch_a == batch_b || batch_b.empty())
    batch = batch_a;
  else if (batch_a.empty())
    batch = batch_b;
  else
    throw ShapeError("matmul batch mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t nb = numel(batch);
  const bool bcast_a = batch_a.empty() && !batch.empty();
  const bool bcast_b = batch_b.empty() && !batch.empty();

  std::vector<T> out(nb * m * n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < nb; ++i) {
    detail::CMapR<T> A(pa + (bcast_a ? 0 : i * m * k), m, k);
    detail::CMapR<T> B(pb + (bcast_b ? 0 : i * k * n), k, n);
    detail::MapR<T> C(out.data() + i * m * n, m, n);
    C.noalias() = A * B;
  }
  Shape oshape = batch;
  oshape.push_back(m);
  oshape.push_back(n);
  return Tensor<T>::from_op(std::move(oshape), std::move(out), "matmul", {a, b},
                            [=](detail::Node<T>& self) {
                              auto& na = *self.parents[0];
                              auto& nb_ = *self.parents[1];
                              for (std::size_t i = 0; i < nb; ++i) {
                                detail::CMapR<T> G(self.grad.data() + i * m * n, m, n);
                                if (na.requires_grad) {
                                  na.ensure_grad();
                                  detail::CMapR<T> B(nb_.data.data() + (bcast_b ? 0 : i * k * n), k, n);
                                  detail::MapR<T> GA(na.grad.data() + (bcast_a ? 0 : i * m * k), m, k);
                                  GA.noalias() += G * B.transpose();
                                }
                                if (nb_.requires_grad) {
                                  nb_.ensure_grad();
                                  detail::CMapR<T> A(na.data.data() + (bcast_a ? 0 : i * m * k), m, k);
                                  detail::MapR<T> GB(nb_.grad.data() + (bcast_b ? 0 : i * k * n), k, n);
                                  GB.noalias() += A.transpose() * G;
                                }
                              }
                            });
}

// ---------------------------------------------------------------------------
// elementwise arithmetic

namespace detail {
template <class T, class Fwd, class DA, class DB>
Tensor<T> binary_bcast(const Tensor<T>& a, const Tensor<T>& b, const char* op, Fwd fwd, DA da, DB db) {
  if (!is_suffix(a.shape(), b.shape()))
    throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t nb = b.numel(), na = a.numel();
  std::vector<T> out(na);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < na; ++i) out[i] = fwd(A[i], B[i % nb]);
  return Tensor<T>::from_op(a.shape(), std::move(out), op, {a, b}, [=](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < na; ++i) pa.grad[i] += da(self.grad[i], pa.data[i], pb.data[i % nb]);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < na; ++i) pb.grad[i % nb] += db(self.grad[i], pa.data[i], pb.data[i % nb]);
    }
  });
}
}  // namespace detail

/// a + b, with b broadcast over a's leading dims when b's shape is a suffix.
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_bcast(
      a, b, "add", [](T x, T y) { return x + y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_bcast(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_bcast(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * s;
  return Tensor<T>::from_op(x.shape(), std::move(out), "scale", {x}, [s](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] * s;
  });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(X[i]);
  return Tensor<T>::from_op(x.shape(), std::move(out), "log", {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] / p.data[i];
  });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(X[i]);
  return Tensor<T>::from_op(x.shape(), std::move(out), "exp", {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] * self.data[i];
  });
}

/// Exact GELU: x * Phi(x).
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(0.5) * X[i] * (T(1) + std::erf(X[i] * inv_sqrt2));
  return Tensor<T>::from_op(x.shape(), std::move(out), "gelu", {x}, [inv_sqrt2](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    const T bias = fault::is_corrupted("gelu") ? T(1.5) : T(1);
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      T v = p.data[i];
      T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      p.grad[i] += bias * self.grad[i] * (cdf + v * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return Tensor<T>::from_op({1}, {s}, "sum", {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (auto& g : p.grad) g += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// ---------------------------------------------------------------------------
// softmax family

namespace detail {
template <class T>
void check_finite(const Tensor<T>& x, const char* op) {
  for (T v : x.data())
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
}
}  // namespace detail

/// Numerically stable softmax along `axis`.
template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
  detail::check_finite(x, "softmax");
  const auto sp = detail::split_at(x.shape(), detail::norm_axis(axis, x.rank()));
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.axis * sp.inner + in;
      T mx = X[base];
      for (std::size_t j = 1; j < sp.axis; ++j) mx = std::max(mx, X[base + j * sp.inner]);
      T z = 0;
      for (std::size_t j = 0; j < sp.axis; ++j) {
        T e = std::exp(X[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < sp.axis; ++j) out[base + j * sp.inner] /= z;
    }
  return Tensor<T>::from_op(x.shape(), std::move(out), "softmax", {x}, [sp](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const T bias = fault::is_corrupted("softmax") ? T(1.5) : T(1);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.axis * sp.inner + in;
        T dot = 0;
        for (std::size_t j = 0; j < sp.axis; ++j) {
          auto idx = base + j * sp.inner;
          dot += self.grad[idx] * self.data[idx];
        }
        for (std::size_t j = 0; j < sp.axis; ++j) {
          auto idx = base + j * sp.inner;
          p.grad[idx] += bias * self.data[idx] * (self.grad[idx] - dot);
        }
      }
  });
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis = -1) {
  detail::check_finite(x, "log_softmax");
  const auto sp = detail::split_at(x.shape(), detail::norm_axis(axis, x.rank()));
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.axis * sp.inner + in;
      T mx = X[base];
      for (std::size_t j = 1; j < sp.axis; ++j) mx = std::max(mx, X[base + j * sp.inner]);
      T z = 0;
      for (std::size_t j = 0; j < sp.axis; ++j) z += std::exp(X[base + j * sp.inner] - mx);
      const T lz = mx + std::log(z);
      for (std::size_t j = 0; j < sp.axis; ++j) out[base + j * sp.inner] = X[base + j * sp.inner] - lz;
    }
  return Tensor<T>::from_op(x.shape(), std::move(out), "log_softmax", {x}, [sp](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.axis * sp.inner + in;
        T gs = 0;
        for (std::size_t j = 0; j < sp.axis; ++j) gs += self.grad[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.axis; ++j) {
          auto idx = base + j * sp.inner;
          p.grad[idx] += self.grad[idx] - std::exp(self.data[idx]) * gs;
        }
      }
  });
}

// ---------------------------------------------------------------------------
// layernorm

inline constexpr double kLayerNormEps = 1e-5;

/// Standardizes each row over the last dim, then applies gain and bias.
template <class T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(kLayerNormEps)) {
  const std::size_t d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d)
    throw ShapeError("layernorm: last dim " + std::to_string(d) + " vs gain " + shape_str(gain.shape()) +
                     ", bias " + shape_str(bias.shape()));
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel()), xhat(x.numel()), rstd(rows);
  auto X = x.data();
  auto G = gain.data();
  auto B = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = X.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      T h = (row[j] - mu) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * G[j] + B[j];
    }
  }
  if (!grad_mode_enabled()) xhat.clear();
  return Tensor<T>::from_op(
      x.shape(), std::move(out), "layernorm", {x, gain, bias},
      [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        std::vector<T> dxh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gy = self.grad.data() + r * d;
          const T* h = xhat.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            if (pg.requires_grad) pg.grad[j] += gy[j] * h[j];
            if (pb.requires_grad) pb.grad[j] += gy[j];
          }
          if (!px.requires_grad) continue;
          T m1 = 0, m2 = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dxh[j] = gy[j] * pg.data[j];
            m1 += dxh[j];
            m2 += dxh[j] * h[j];
          }
          m1 /= static_cast<T>(d);
          m2 /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) px.grad[r * d + j] += rstd[r] * (dxh[j] - m1 - h[j] * m2);
        }
      });
}

// ---------------------------------------------------------------------------
// shape manipulation

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return Tensor<T>::from_op(std::move(shape), x.to_vector(), "reshape", {x}, [](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    detail::add_into(p.grad, self.grad);
  });
}

namespace detail {
// Copies src (shape s) into dst with axes a0 < a1 swapped. When `accumulate`
// is set, adds instead of assigning; used for the backward pass.
template <class T>
void swap_axes(const T* src, T* dst, const Shape& s, std::size_t a0, std::size_t a1, bool accumulate) {
  std::size_t outer = 1, mid = 1, inner = 1;
  for (std::size_t i = 0; i < a0; ++i) outer *= s[i];
  for (std::size_t i = a0 + 1; i < a1; ++i) mid *= s[i];
  for (std::size_t i = a1 + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n0 = s[a0], n1 = s[a1];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t m = 0; m < mid; ++m)
        for (std::size_t j = 0; j < n1; ++j) {
          const T* from = src + (((o * n0 + i) * mid + m) * n1 + j) * inner;
          T* to = dst + (((o * n1 + j) * mid + m) * n0 + i) * inner;
          if (accumulate)
            for (std::size_t q = 0; q < inner; ++q) to[q] += from[q];
          else
            std::copy(from, from + inner, to);
        }
}
}  // namespace detail

template <class T>
Tensor<T> transpose(const Tensor<T>& x, int axis0 = -2, int axis1 = -1) {
  std::size_t a0 = detail::norm_axis(axis0, x.rank()), a1 = detail::norm_axis(axis1, x.rank());
  if (a0 == a1) return reshape(x, x.shape());
  if (a0 > a1) std::swap(a0, a1);
  Shape os = x.shape();
  std::swap(os[a0], os[a1]);
  std::vector<T> out(x.numel());
  detail::swap_axes(x.data().data(), out.data(), x.shape(), a0, a1, false);
  return Tensor<T>::from_op(os, std::move(out), "transpose", {x}, [a0, a1, os](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    detail::swap_axes(self.grad.data(), p.grad.data(), os, a0, a1, true);
  });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis = 0) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t a = detail::norm_axis(axis, xs[0].rank());
  Shape os = xs[0].shape();
  os[a] = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    Shape ref = xs[0].shape();
    if (s.size() != ref.size()) throw ShapeError("concat rank mismatch: " + shape_str(s) + " vs " + shape_str(ref));
    s[a] = ref[a] = 0;
    if (s != ref) throw ShapeError("concat shape mismatch: " + shape_str(x.shape()) + " vs " + shape_str(xs[0].shape()));
    os[a] += x.dim(static_cast<int>(a));
  }
  const auto sp = detail::split_at(os, a);
  std::vector<T> out(numel(os));
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const auto& x : xs) {
    const std::size_t w = x.dim(static_cast<int>(a)) * sp.inner;
    widths.push_back(w);
    auto X = x.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(X.data() + o * w, w, out.data() + o * sp.axis * sp.inner + off);
    off += w;
  }
  return Tensor<T>::from_op(os, std::move(out), "concat", xs, [sp, widths](detail::Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      const std::size_t w = widths[k];
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t q = 0; q < w; ++q) p.grad[o * w + q] += self.grad[o * sp.axis * sp.inner + off + q];
      }
      off += w;
    }
  });
}

/// x[..., start:start+len, ...] along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t start, std::size_t len) {
  const std::size_t a = detail::norm_axis(axis, x.rank());
  if (len == 0 || start + len > x.shape()[a])
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) + ") out of range for " +
                     shape_str(x.shape()));
  const auto sp = detail::split_at(x.shape(), a);
  Shape os = x.shape();
  os[a] = len;
  std::vector<T> out(numel(os));
  auto X = x.data();
  const std::size_t w = len * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(X.data() + o * sp.axis * sp.inner + start * sp.inner, w, out.data() + o * w);
  return Tensor<T>::from_op(os, std::move(out), "slice", {x}, [sp, start, w](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t q = 0; q < w; ++q) p.grad[o * sp.axis * sp.inner + start * sp.inner + q] += self.grad[o * w + q];
  });
}

/// Selects entries along `axis` by index; indices may repeat (grads sum).
template <class T>
Tensor<T> gather(const Tensor<T>& x, int axis, const std::vector<std::size_t>& index) {
  const std::size_t a = detail::norm_axis(axis, x.rank());
  const auto sp = detail::split_at(x.shape(), a);
  for (auto i : index)
    if (i >= sp.axis)
      throw ShapeError("gather index " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  Shape os = x.shape();
  os[a] = index.size();
  const std::size_t n = index.size();
  std::vector<T> out(numel(os));
  auto X = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < n; ++j)
      std::copy_n(X.data() + (o * sp.axis + index[j]) * sp.inner, sp.inner, out.data() + (o * n + j) * sp.inner);
  return Tensor<T>::from_op(os, std::move(out), "gather", {x}, [sp, index, n](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < n; ++j) {
        T* to = p.grad.data() + (o * sp.axis + index[j]) * sp.inner;
        const T* from = self.grad.data() + (o * n + j) * sp.inner;
        for (std::size_t q = 0; q < sp.inner; ++q) to[q] += from[q];
      }
  });
}

/// Rows of `table` [V, D] selected by id.
template <class T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_str(table.shape()));
  return gather(table, 0, ids);
}

}  // namespace dkt
