#pragma once

// Differentiable tensor operations. Spatial maps use NHWC layout (B, H, W, C)
// so a per-position channel projection is a plain matrix product over the
// flattened (B*H*W, C) view.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "saarn/errors.hpp"
#include "saarn/tensor/autograd.hpp"

namespace saarn::ops {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <class T>
using RowVecMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <class T>
using CRowVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

using Index = Eigen::Index;
// One byte per token / pixel; nonzero means valid or foreground.
using ByteMask = std::vector<std::uint8_t>;

namespace detail {

template <class T>
Node<T>& parent(Node<T>& self, std::size_t i) {
  return *self.parents[i];
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline Shape with_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

// Column sums added into g, rows in order. Eigen's colwise().sum() picks
// its packet path by address, so its rounding varies between runs.
template <class T, class M>
void add_column_sums(std::span<T> g, const M& dY) {
  RowVecMap<T> acc(g.data(), dY.cols());
  for (Eigen::Index r = 0; r < dY.rows(); ++r) acc += dY.row(r);
}

// C (M x N, row stride ldc) = or += op(A) * op(B), with op(A) M x K and op(B)
// K x N; a transposed operand is stored row-major the other way round.
// Eigen's blocked GEMM packs its operands, so its result does not depend on
// where they live. Its small-size and matrix-vector paths peel scalar
// edges by address, so those shapes go through a plain ordered loop.
template <class T>
void gemm(const T* a, Index lda, bool ta, const T* b, Index ldb, bool tb, T* c, Index ldc,
          Index M, Index N, Index K, bool accumulate) {
  if (M == 0 || N == 0) return;
  if (M > 1 && N > 1 && M + N + K >= 20) {
    using SMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
    Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>> C(c, M, N, Eigen::OuterStride<>(ldc));
    auto run = [&](const auto& A, const auto& B) {
      if (accumulate)
        C.noalias() += A * B;
      else
        C.noalias() = A * B;
    };
    const SMap A = ta ? SMap(a, K, M, Eigen::OuterStride<>(lda)) : SMap(a, M, K, Eigen::OuterStride<>(lda));
    const SMap B = tb ? SMap(b, N, K, Eigen::OuterStride<>(ldb)) : SMap(b, K, N, Eigen::OuterStride<>(ldb));
    if (ta && tb) run(A.transpose(), B.transpose());
    else if (ta) run(A.transpose(), B);
    else if (tb) run(A, B.transpose());
    else run(A, B);
    return;
  }
  for (Index i = 0; i < M; ++i) {
    T* row = c + i * ldc;
    if (!accumulate) std::fill(row, row + N, T(0));
    for (Index k = 0; k < K; ++k) {
      const T av = ta ? a[k * lda + i] : a[i * lda + k];
      if (tb)
        for (Index j = 0; j < N; ++j) row[j] += av * b[j * ldb + k];
      else
        for (Index j = 0; j < N; ++j) row[j] += av * b[k * ldb + j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "add: " + to_string(a.shape()) +
                                              " vs " + to_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return Var<T>::make(a.shape(), std::move(y), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& in = detail::parent(self, p);
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "sub: shape mismatch");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return Var<T>::make(a.shape(), std::move(y), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& in = detail::parent(self, p);
      if (!in.requires_grad) continue;
      const T sign = p == 0 ? T(1) : T(-1);
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "mul: " + to_string(a.shape()) +
                                              " vs " + to_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return Var<T>::make(a.shape(), std::move(y), {a, b}, [](Node<T>& self) {
    auto& na = detail::parent(self, 0);
    auto& nb = detail::parent(self, 1);
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * s;
  return Var<T>::make(a.shape(), std::move(y), {a}, [s](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

namespace detail {

// dfn(x, y) is the derivative expressed through input and output.
template <class T, class Fn, class DFn>
Var<T> unary(const Var<T>& x, Fn fn, DFn dfn) {
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fn(x.value()[i]);
  return Var<T>::make(x.shape(), std::move(y), {x}, [dfn](Node<T>& self) {
    auto& in = parent(self, 0);
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * dfn(in.value[i], self.value[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

// Exact (erf) GELU.
template <class T>
Var<T> gelu(const Var<T>& x) {
  return detail::unary(
      x,
      [](T v) { return T(0.5) * v * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2))); },
      [](T v, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2)));
        const T pdf = std::exp(T(-0.5) * v * v) * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
        return cdf + v * pdf;
      });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  detail::require(numel(shape) == x.size(),
                  "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  std::vector<T> y(x.value().begin(), x.value().end());
  return Var<T>::make(std::move(shape), std::move(y), {x}, [](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// Concatenates along the last axis; all leading dims must agree.
template <class T>
Var<T> concat_last(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    const std::size_t w = s.back();
    s.pop_back();
    detail::require(s == lead, "concat_last: leading dims differ");
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = numel(lead);
  std::vector<T> y(rows * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::memcpy(&y[r * total + off], src + r * widths[k], widths[k] * sizeof(T));
    off += widths[k];
  }
  Shape out = lead;
  out.push_back(total);
  return Var<T>::make(out, std::move(y), parts, [widths, rows, total](Node<T>& self) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      auto& in = detail::parent(self, k);
      if (in.requires_grad) {
        auto& g = in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c)
            g[r * widths[k] + c] += self.grad[r * total + o + c];
      }
      o += widths[k];
    }
  });
}

// ---------------------------------------------------------------------------
// Dense layers

// y = x W + b over the last axis of x. w: (K, N), b: (N) or undefined.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = {}) {
  detail::require(w.rank() == 2, "linear: weight must be 2-D");
  const auto K = static_cast<Index>(w.dim(0));
  const auto N = static_cast<Index>(w.dim(1));
  detail::require(x.rank() >= 1 && x.shape().back() == w.dim(0),
                  "linear: input " + to_string(x.shape()) + " vs weight " +
                      to_string(w.shape()));
  if (b.defined()) detail::require(b.size() == w.dim(1), "linear: bias size");
  const auto M = static_cast<Index>(x.size()) / K;
  std::vector<T> y(static_cast<std::size_t>(M * N));
  MatMap<T> Y(y.data(), M, N);
  detail::gemm(x.data(), K, false, w.data(), N, false, y.data(), N, M, N, K, false);
  if (b.defined()) Y.rowwise() += CRowVecMap<T>(b.data(), N);

  std::vector<Var<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return Var<T>::make(detail::with_last(x.shape(), w.dim(1)), std::move(y), parents,
                      [M, K, N](Node<T>& self) {
                        CMatMap<T> dY(self.grad.data(), M, N);
                        auto& nx = detail::parent(self, 0);
                        auto& nw = detail::parent(self, 1);
                        if (nx.requires_grad)
                          detail::gemm(dY.data(), N, false, nw.value.data(), N, true,
                                       nx.ensure_grad().data(), K, M, K, N, true);
                        if (nw.requires_grad)
                          detail::gemm(nx.value.data(), K, true, dY.data(), N, false,
                                       nw.ensure_grad().data(), N, K, N, M, true);
                        if (self.parents.size() > 2) {
                          auto& nb = detail::parent(self, 2);
                          if (nb.requires_grad)
                            detail::add_column_sums<T>(nb.ensure_grad(), dY);
                        }
                      });
}

struct ConvSpec {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
};

// x: (B, H, W, C); w: (k*k*C, O) with rows ordered (ky, kx, c); b: (O).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec spec) {
  detail::require(x.rank() == 4, "conv2d: input must be (B, H, W, C)");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t k = spec.kernel, s = spec.stride, pad = spec.pad;
  detail::require(w.rank() == 2 && w.dim(0) == k * k * C,
                  "conv2d: weight " + to_string(w.shape()) + " for input " +
                      to_string(x.shape()));
  detail::require(H + 2 * pad >= k && W + 2 * pad >= k, "conv2d: kernel larger than input");
  const std::size_t Ho = (H + 2 * pad - k) / s + 1;
  const std::size_t Wo = (W + 2 * pad - k) / s + 1;
  const std::size_t O = w.dim(1);
  const std::size_t rows = B * Ho * Wo;
  const std::size_t width = k * k * C;

  auto cols = std::make_shared<std::vector<T>>(rows * width, T(0));
  const T* xv = x.data();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        T* row = cols->data() + ((bi * Ho + oy) * Wo + ox) * width;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            std::memcpy(row + (ky * k + kx) * C,
                        xv + ((bi * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C,
                        C * sizeof(T));
          }
        }
      }

  const auto M = static_cast<Index>(rows), Kd = static_cast<Index>(width),
             N = static_cast<Index>(O);
  std::vector<T> y(rows * O);
  MatMap<T> Y(y.data(), M, N);
  detail::gemm(cols->data(), Kd, false, w.data(), N, false, y.data(), N, M, N, Kd, false);
  if (b.defined()) {
    detail::require(b.size() == O, "conv2d: bias size");
    Y.rowwise() += CRowVecMap<T>(b.data(), N);
  }
  std::vector<Var<T>> parents{x, w};
  const bool has_bias = b.defined();
  if (has_bias) parents.push_back(b);

  return Var<T>::make(
      {B, Ho, Wo, O}, std::move(y), std::move(parents),
      [=](Node<T>& self) {
        CMatMap<T> dY(self.grad.data(), M, N);
        auto& nx = detail::parent(self, 0);
        auto& nw = detail::parent(self, 1);
        if (nw.requires_grad)
          detail::gemm(cols->data(), Kd, true, dY.data(), N, false, nw.ensure_grad().data(), N,
                       Kd, N, M, true);
        if (has_bias) {
          auto& nb = detail::parent(self, 2);
          if (nb.requires_grad) detail::add_column_sums<T>(nb.ensure_grad(), dY);
        }
        if (nx.requires_grad) {
          Mat<T> dcols(M, Kd);
          detail::gemm(dY.data(), N, false, nw.value.data(), N, true, dcols.data(), Kd, M, Kd, N,
                       false);
          auto& gx = nx.ensure_grad();
          for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t oy = 0; oy < Ho; ++oy)
              for (std::size_t ox = 0; ox < Wo; ++ox) {
                const T* row = dcols.data() + ((bi * Ho + oy) * Wo + ox) * width;
                for (std::size_t ky = 0; ky < k; ++ky) {
                  const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(pad);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                  for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    T* dst = gx.data() + ((bi * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
                    const T* src = row + (ky * k + kx) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                  }
                }
              }
        }
      });
}

// Normalizes over the last axis, then applies per-channel gain and shift.
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  T eps = T(1e-5)) {
  const std::size_t C = x.shape().back();
  detail::require(gamma.size() == C && beta.size() == C, "layer_norm: parameter size");
  const std::size_t rows = x.size() / C;
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  std::vector<T> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * C;
    T mean = 0;
    for (std::size_t c = 0; c < C; ++c) mean += xr[c];
    mean /= T(C);
    T var = 0;
    for (std::size_t c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= T(C);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < C; ++c) {
      const T h = (xr[c] - mean) * is;
      (*xhat)[r * C + c] = h;
      y[r * C + c] = h * gamma.value()[c] + beta.value()[c];
    }
  }
  return Var<T>::make(x.shape(), std::move(y), {x, gamma, beta},
                      [=](Node<T>& self) {
                        auto& nx = detail::parent(self, 0);
                        auto& ng = detail::parent(self, 1);
                        auto& nb = detail::parent(self, 2);
                        for (std::size_t r = 0; r < rows; ++r) {
                          const T* dy = self.grad.data() + r * C;
                          const T* h = xhat->data() + r * C;
                          if (ng.requires_grad) {
                            auto& g = ng.ensure_grad();
                            for (std::size_t c = 0; c < C; ++c) g[c] += dy[c] * h[c];
                          }
                          if (nb.requires_grad) {
                            auto& g = nb.ensure_grad();
                            for (std::size_t c = 0; c < C; ++c) g[c] += dy[c];
                          }
                          if (nx.requires_grad) {
                            T m1 = 0, m2 = 0;
                            for (std::size_t c = 0; c < C; ++c) {
                              const T dh = dy[c] * ng.value[c];
                              m1 += dh;
                              m2 += dh * h[c];
                            }
                            m1 /= T(C);
                            m2 /= T(C);
                            T* g = nx.ensure_grad().data() + r * C;
                            for (std::size_t c = 0; c < C; ++c)
                              g[c] += (*inv_std)[r] * (dy[c] * ng.value[c] - m1 - h[c] * m2);
                          }
                        }
                      });
}

// ---------------------------------------------------------------------------
// Spatial resampling

// Non-overlapping k x k mean over (B, H, W, C).
template <class T>
Var<T> avg_pool(const Var<T>& x, std::size_t k) {
  detail::require(x.rank() == 4, "avg_pool: input must be (B, H, W, C)");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  detail::require(k >= 1 && H % k == 0 && W % k == 0, "avg_pool: window must divide H and W");
  const std::size_t Ho = H / k, Wo = W / k;
  const T inv = T(1) / T(k * k);
  std::vector<T> y(B * Ho * Wo * C, T(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t iy = 0; iy < H; ++iy)
      for (std::size_t ix = 0; ix < W; ++ix) {
        const T* src = x.data() + ((b * H + iy) * W + ix) * C;
        T* dst = y.data() + ((b * Ho + iy / k) * Wo + ix / k) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c] * inv;
      }
  return Var<T>::make({B, Ho, Wo, C}, std::move(y), {x}, [=](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t iy = 0; iy < H; ++iy)
        for (std::size_t ix = 0; ix < W; ++ix) {
          T* dst = g.data() + ((b * H + iy) * W + ix) * C;
          const T* src = self.grad.data() + ((b * Ho + iy / k) * Wo + ix / k) * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += src[c] * inv;
        }
  });
}

template <class T>
Var<T> upsample_nearest(const Var<T>& x, std::size_t k) {
  detail::require(x.rank() == 4, "upsample_nearest: input must be (B, H, W, C)");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t Ho = H * k, Wo = W * k;
  std::vector<T> y(B * Ho * Wo * C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox)
        std::memcpy(&y[((b * Ho + oy) * Wo + ox) * C],
                    x.data() + ((b * H + oy / k) * W + ox / k) * C, C * sizeof(T));
  return Var<T>::make({B, Ho, Wo, C}, std::move(y), {x}, [=](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          T* dst = g.data() + ((b * H + oy / k) * W + ox / k) * C;
          const T* src = self.grad.data() + ((b * Ho + oy) * Wo + ox) * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
        }
  });
}

// (B, R, C) -> (B, C): mean over the R positions of each sample.
template <class T>
Var<T> mean_positions(const Var<T>& x) {
  detail::require(x.rank() >= 2, "mean_positions: need a leading batch axis");
  const std::size_t B = x.dim(0), C = x.shape().back();
  const std::size_t R = x.size() / (B * C);
  const T inv = T(1) / T(R);
  std::vector<T> y(B * C, T(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) y[b * C + c] += x.data()[(b * R + r) * C + c] * inv;
  return Var<T>::make({B, C}, std::move(y), {x}, [=](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) g[(b * R + r) * C + c] += self.grad[b * C + c] * inv;
  });
}

// ---------------------------------------------------------------------------
// Token operations

// table: (V, D); ids: B*N entries -> (B, N, D).
template <class T>
Var<T> embedding(const Var<T>& table, const std::vector<std::size_t>& ids,
                 std::size_t batch, std::size_t tokens) {
  detail::require(ids.size() == batch * tokens, "embedding: id count");
  const std::size_t V = table.dim(0), D = table.dim(1);
  std::vector<T> y(ids.size() * D);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V) throw RangeError("embedding: token id out of range");
    std::memcpy(&y[i * D], table.data() + ids[i] * D, D * sizeof(T));
  }
  return Var<T>::make({batch, tokens, D}, std::move(y), {table}, [ids, D](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t d = 0; d < D; ++d) g[ids[i] * D + d] += self.grad[i * D + d];
  });
}

// x: (B, N, D) plus table rows 0..N-1 of table (L, D), L >= N.
template <class T>
Var<T> add_positional(const Var<T>& x, const Var<T>& table) {
  detail::require(x.rank() == 3 && table.rank() == 2 && table.dim(1) == x.dim(2) &&
                      table.dim(0) >= x.dim(1),
                  "add_positional: shape mismatch");
  const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
  std::vector<T> y(x.value().begin(), x.value().end());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < N * D; ++i) y[b * N * D + i] += table.data()[i];
  return Var<T>::make(x.shape(), std::move(y), {x, table}, [=](Node<T>& self) {
    auto& nx = detail::parent(self, 0);
    auto& nt = detail::parent(self, 1);
    if (nx.requires_grad) {
      auto& g = nx.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nt.requires_grad) {
      auto& g = nt.ensure_grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < N * D; ++i) g[i] += self.grad[b * N * D + i];
    }
  });
}

// Mean of the valid tokens of each sample: (B, N, D) -> (B, D).
template <class T>
Var<T> masked_mean(const Var<T>& tokens, const ByteMask& mask) {
  detail::require(tokens.rank() == 3, "masked_mean: tokens must be (B, N, D)");
  const std::size_t B = tokens.dim(0), N = tokens.dim(1), D = tokens.dim(2);
  detail::require(mask.size() == B * N, "masked_mean: mask size");
  std::vector<T> inv(B, T(0));
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < N; ++i) n += mask[b * N + i] ? 1 : 0;
    if (n == 0) throw InvalidInputError("masked_mean: sample with no valid tokens");
    inv[b] = T(1) / T(n);
  }
  std::vector<T> y(B * D, T(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < N; ++i)
      if (mask[b * N + i])
        for (std::size_t d = 0; d < D; ++d)
          y[b * D + d] += tokens.data()[(b * N + i) * D + d] * inv[b];
  return Var<T>::make({B, D}, std::move(y), {tokens}, [=](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < N; ++i)
        if (mask[b * N + i])
          for (std::size_t d = 0; d < D; ++d) g[(b * N + i) * D + d] += self.grad[b * D + d] * inv[b];
  });
}

// Scaled dot-product attention with key masking and optional head split.
// q: (B, P, E); k, v: (B, N, E); mask: B*N bytes (empty = all valid).
// Masked keys receive exactly zero weight. weights_out, if given, receives
// the (B, heads, P, N) weight tensor.
template <class T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 const ByteMask& mask, std::size_t heads, T score_scale,
                 std::vector<T>* weights_out = nullptr) {
  detail::require(q.rank() == 3 && k.rank() == 3 && v.rank() == 3, "attention: rank-3 inputs");
  const std::size_t B = q.dim(0), P = q.dim(1), E = q.dim(2), N = k.dim(1);
  detail::require(k.dim(0) == B && v.dim(0) == B && k.dim(2) == E && v.dim(2) == E &&
                      v.dim(1) == N,
                  "attention: q " + to_string(q.shape()) + " k " + to_string(k.shape()) +
                      " v " + to_string(v.shape()));
  detail::require(heads >= 1 && E % heads == 0, "attention: head count must divide width");
  detail::require(mask.empty() || mask.size() == B * N, "attention: mask size");
  for (std::size_t b = 0; b < B; ++b) {
    bool any = mask.empty();
    for (std::size_t i = 0; i < N && !any; ++i) any = mask[b * N + i] != 0;
    if (!any) throw InvalidInputError("attention: every key token is masked");
  }
  const std::size_t dh = E / heads;
  auto weights = std::make_shared<std::vector<T>>(B * heads * P * N, T(0));
  std::vector<T> y(B * P * E, T(0));
  const auto iP = static_cast<Index>(P), iN = static_cast<Index>(N),
             iE = static_cast<Index>(E), idh = static_cast<Index>(dh);

  for (std::size_t b = 0; b < B; ++b) {
    CMatMap<T> Q(q.data() + b * P * E, iP, iE);
    CMatMap<T> Kt(k.data() + b * N * E, iN, iE);
    CMatMap<T> V(v.data() + b * N * E, iN, iE);
    MatMap<T> Y(y.data() + b * P * E, iP, iE);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto off = static_cast<Index>(h * dh);
      MatMap<T> A(weights->data() + (b * heads + h) * P * N, iP, iN);
      detail::gemm(Q.data() + off, iE, false, Kt.data() + off, iE, true, A.data(), iN, iP, iN, idh,
                   false);
      for (std::size_t p = 0; p < P; ++p) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t i = 0; i < N; ++i)
          if (mask.empty() || mask[b * N + i]) mx = std::max(mx, A(p, i) * score_scale);
        T denom = 0;
        for (std::size_t i = 0; i < N; ++i) {
          if (mask.empty() || mask[b * N + i]) {
            const T e = std::exp(A(p, i) * score_scale - mx);
            A(p, i) = e;
            denom += e;
          } else {
            A(p, i) = T(0);
          }
        }
        for (std::size_t i = 0; i < N; ++i) A(p, i) /= denom;
      }
      detail::gemm(A.data(), iN, false, V.data() + off, iE, false, Y.data() + off, iE, iP, idh, iN,
                   false);
    }
  }
  if (weights_out) *weights_out = *weights;

  return Var<T>::make(q.shape(), std::move(y), {q, k, v}, [=](Node<T>& self) {
    auto& nq = detail::parent(self, 0);
    auto& nk = detail::parent(self, 1);
    auto& nv = detail::parent(self, 2);
    Mat<T> dA(iP, iN), dS(iP, iN);
    for (std::size_t b = 0; b < B; ++b) {
      CMatMap<T> dY(self.grad.data() + b * P * E, iP, iE);
      CMatMap<T> Q(nq.value.data() + b * P * E, iP, iE);
      CMatMap<T> Kt(nk.value.data() + b * N * E, iN, iE);
      CMatMap<T> V(nv.value.data() + b * N * E, iN, iE);
      for (std::size_t h = 0; h < heads; ++h) {
        const auto off = static_cast<Index>(h * dh);
        CMatMap<T> A(weights->data() + (b * heads + h) * P * N, iP, iN);
        if (nv.requires_grad)
          detail::gemm(A.data(), iN, true, dY.data() + off, iE, false,
                       nv.ensure_grad().data() + b * N * E + off, iE, iN, idh, iP, true);
        if (!nq.requires_grad && !nk.requires_grad) continue;
        detail::gemm(dY.data() + off, iE, false, V.data() + off, iE, true, dA.data(), iN, iP, iN,
                     idh, false);
        for (Index p = 0; p < iP; ++p) {
          T dot = 0;
          for (Index i = 0; i < iN; ++i) dot += dA(p, i) * A(p, i);
          for (Index i = 0; i < iN; ++i) dS(p, i) = A(p, i) * (dA(p, i) - dot) * score_scale;
        }
        if (nq.requires_grad)
          detail::gemm(dS.data(), iN, false, Kt.data() + off, iE, false,
                       nq.ensure_grad().data() + b * P * E + off, iE, iP, idh, iN, true);
        if (nk.requires_grad)
          detail::gemm(dS.data(), iN, true, Q.data() + off, iE, false,
                       nk.ensure_grad().data() + b * N * E + off, iE, iN, idh, iP, true);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Per-sample weighting

// Softmax over the K columns of (B, K) logits. Disabled columns are excluded
// and receive exactly zero weight.
template <class T>
Var<T> softmax_rows(const Var<T>& logits, const std::vector<bool>& enabled = {}) {
  detail::require(logits.rank() == 2, "softmax_rows: logits must be (B, K)");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  detail::require(enabled.empty() || enabled.size() == K, "softmax_rows: toggle count");
  auto on = [&enabled](std::size_t j) { return enabled.empty() || enabled[j]; };
  bool any = false;
  for (std::size_t j = 0; j < K; ++j) any = any || on(j);
  if (!any) throw InvalidInputError("softmax_rows: every column disabled");
  std::vector<T> y(B * K, T(0));
  for (std::size_t b = 0; b < B; ++b) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < K; ++j)
      if (on(j)) mx = std::max(mx, logits.data()[b * K + j]);
    T denom = 0;
    for (std::size_t j = 0; j < K; ++j)
      if (on(j)) {
        y[b * K + j] = std::exp(logits.data()[b * K + j] - mx);
        denom += y[b * K + j];
      }
    for (std::size_t j = 0; j < K; ++j) y[b * K + j] /= denom;
  }
  return Var<T>::make(logits.shape(), std::move(y), {logits}, [=](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t b = 0; b < B; ++b) {
      T dot = 0;
      for (std::size_t j = 0; j < K; ++j) dot += self.grad[b * K + j] * self.value[b * K + j];
      for (std::size_t j = 0; j < K; ++j)
        g[b * K + j] += self.value[b * K + j] * (self.grad[b * K + j] - dot);
    }
  });
}

// y[b, ...] = x[b, ...] * w[b, column]; x has leading batch axis B, w is (B, K).
template <class T>
Var<T> scale_per_sample(const Var<T>& x, const Var<T>& w, std::size_t column) {
  detail::require(w.rank() == 2 && w.dim(0) == x.dim(0) && column < w.dim(1),
                  "scale_per_sample: weight shape");
  const std::size_t B = x.dim(0), K = w.dim(1), R = x.size() / B;
  std::vector<T> y(x.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < R; ++r)
      y[b * R + r] = x.data()[b * R + r] * w.data()[b * K + column];
  return Var<T>::make(x.shape(), std::move(y), {x, w}, [=](Node<T>& self) {
    auto& nx = detail::parent(self, 0);
    auto& nw = detail::parent(self, 1);
    for (std::size_t b = 0; b < B; ++b) {
      const T wb = nw.value[b * K + column];
      T acc = 0;
      for (std::size_t r = 0; r < R; ++r) acc += self.grad[b * R + r] * nx.value[b * R + r];
      if (nx.requires_grad) {
        auto& g = nx.ensure_grad();
        for (std::size_t r = 0; r < R; ++r) g[b * R + r] += self.grad[b * R + r] * wb;
      }
      if (nw.requires_grad) nw.ensure_grad()[b * K + column] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value()) s += v;
  return Var<T>::make({1}, {s}, {x}, [](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

// Scalar sum_i x_i * c_i with a constant coefficient vector.
template <class T>
Var<T> weighted_sum(const Var<T>& x, std::vector<T> coeffs) {
  detail::require(coeffs.size() == x.size(), "weighted_sum: coefficient count");
  T s = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) s += x.value()[i] * coeffs[i];
  return Var<T>::make({1}, {s}, {x}, [coeffs = std::move(coeffs)](Node<T>& self) {
    auto& g = detail::parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * coeffs[i];
  });
}

}  // namespace saarn::ops
