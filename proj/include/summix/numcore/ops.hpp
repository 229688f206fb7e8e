// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_NUMCORE_OPS_HPP
#define SUMMIX_NUMCORE_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "summix/numcore/kernels.hpp"
#include "summix/numcore/tensor.hpp"

namespace summix {

// One flag per (batch, frame); non-zero means the frame is valid.
using FrameMask = std::vector<std::uint8_t>;

inline constexpr double kLogFloor = 1e-10;

namespace ops {

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

inline std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// Flat offset into `src` for every element of the broadcast output.
inline std::vector<std::size_t> broadcast_index(const Shape& src, const Shape& out) {
    const std::size_t r = out.size();
    std::vector<std::size_t> stride(r, 0);
    std::size_t s = 1;
    for (std::size_t i = r; i-- > 0;) {
        const std::size_t k = i + src.size();
        if (k < r) continue;
        const std::size_t d = src[k - r];
        stride[i] = d == 1 ? 0 : s;
        s *= d;
    }
    const std::size_t n = shape_numel(out);
    std::vector<std::size_t> idx(n);
    std::vector<std::size_t> counter(r, 0);
    std::size_t off = 0;
    for (std::size_t e = 0; e < n; ++e) {
        idx[e] = off;
        for (std::size_t i = r; i-- > 0;) {
            ++counter[i];
            off += stride[i];
            if (counter[i] < out[i]) break;
            off -= stride[i] * counter[i];
            counter[i] = 0;
        }
    }
    return idx;
}

enum class BinaryKind { add, sub, mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
    const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
    const std::size_t n = shape_numel(out_shape);
    std::vector<std::size_t> ia, ib;
    const bool same_a = a.shape() == out_shape;
    const bool same_b = b.shape() == out_shape;
    if (!same_a) ia = broadcast_index(a.shape(), out_shape);
    if (!same_b) ib = broadcast_index(b.shape(), out_shape);
    auto at = [&](std::size_t e) { return same_a ? e : ia[e]; };
    auto bt = [&](std::size_t e) { return same_b ? e : ib[e]; };
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(n);
    for (std::size_t e = 0; e < n; ++e) {
        const T x = av[at(e)], y = bv[bt(e)];
        out[e] = kind == BinaryKind::add ? x + y : kind == BinaryKind::sub ? x - y : x * y;
    }
    return Tensor<T>::make_result(out_shape, std::move(out), {a, b},
                                  [a, b, kind, ia = std::move(ia), ib = std::move(ib), same_a,
                                   same_b](const std::vector<T>& g) {
                                      auto* ga = grad_target(a);
                                      auto* gb = grad_target(b);
                                      const auto& av = a.values();
                                      const auto& bv = b.values();
                                      for (std::size_t e = 0; e < g.size(); ++e) {
                                          const std::size_t i = same_a ? e : ia[e];
                                          const std::size_t j = same_b ? e : ib[e];
                                          switch (kind) {
                                          case BinaryKind::add:
                                              if (ga) (*ga)[i] += g[e];
                                              if (gb) (*gb)[j] += g[e];
                                              break;
                                          case BinaryKind::sub:
                                              if (ga) (*ga)[i] += g[e];
                                              if (gb) (*gb)[j] -= g[e];
                                              break;
                                          case BinaryKind::mul:
                                              if (ga) (*ga)[i] += g[e] * bv[j];
                                              if (gb) (*gb)[j] += g[e] * av[i];
                                              break;
                                          }
                                      }
                                  });
}

template <typename T, typename F, typename DF>
Tensor<T> unary(const Tensor<T>& x, F f, DF df) {
    const auto& xv = x.values();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [x, df](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        const auto& xv = x.values();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i]);
    });
}

} // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryKind::add);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryKind::sub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryKind::mul);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
    return detail::unary(x, [s](T v) { return v * s; }, [s](T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
    return detail::unary(x, [s](T v) { return v + s; }, [](T) { return T(1); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::unary(x, [](T v) { return std::exp(v); }, [](T v) { return std::exp(v); });
}

// Natural log with the input clamped at kLogFloor; no gradient below the floor.
template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x) {
    const T floor = static_cast<T>(kLogFloor);
    return detail::unary(
        x, [floor](T v) { return std::log(std::max(v, floor)); },
        [floor](T v) { return v > floor ? T(1) / v : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    auto sg = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
    return detail::unary(x, sg, [sg](T v) {
        const T s = sg(v);
        return s * (T(1) - s);
    });
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
    auto sg = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
    return detail::unary(
        x, [sg](T v) { return v * sg(v); },
        [sg](T v) {
            const T s = sg(v);
            return s + v * s * (T(1) - s);
        });
}

// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
    constexpr T inv_sqrt2pi = static_cast<T>(0.39894228040143267794);
    return detail::unary(
        x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
        [](T v) { return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v); });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    detail::require(shape_numel(shape) == x.numel(),
                    "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
    return Tensor<T>::make_result(std::move(shape), x.values(), {x},
                                  [x](const std::vector<T>& g) { accumulate_grad(x, std::span<const T>(g)); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.values()) s += v;
    return Tensor<T>::make_result({}, {s}, {x}, [x](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (auto& v : gx) v += g[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// Reduces the last axis by summation.
template <typename T>
Tensor<T> sum_last(const Tensor<T>& x) {
    detail::require(x.rank() >= 1, "sum_last: scalar input");
    const std::size_t d = x.shape().back();
    const std::size_t rows = x.numel() / d;
    Shape out_shape(x.shape().begin(), x.shape().end() - 1);
    std::vector<T> out(rows, T(0));
    const auto& xv = x.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) out[r] += xv[r * d + j];
    return Tensor<T>::make_result(out_shape, std::move(out), {x}, [x, d, rows](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[r];
    });
}

// Mean over the leading axis: [N, ...] -> [...].
template <typename T>
Tensor<T> mean_leading(const Tensor<T>& x) {
    detail::require(x.rank() >= 1 && x.dim(0) > 0, "mean_leading: empty leading axis");
    const std::size_t n = x.dim(0);
    const std::size_t inner = x.numel() / n;
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    std::vector<T> out(inner, T(0));
    const auto& xv = x.values();
    const T inv = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) out[j] += xv[i * inner + j];
    for (auto& v : out) v *= inv;
    return Tensor<T>::make_result(out_shape, std::move(out), {x}, [x, n, inner, inv](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < inner; ++j) gx[i * inner + j] += g[j] * inv;
    });
}

// Numerically stable softmax along `axis` (negative counts from the end).
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
    const int r = static_cast<int>(x.rank());
    detail::require(r >= 1, "softmax: scalar input");
    const int ax = axis < 0 ? r + axis : axis;
    detail::require(ax >= 0 && ax < r, "softmax: axis out of range");
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= x.dim(i);
    for (int i = ax + 1; i < r; ++i) inner *= x.dim(i);
    const std::size_t len = x.dim(ax);
    const auto& xv = x.values();
    for (T v : xv)
        if (std::isnan(v)) throw std::domain_error("softmax: NaN input");
    std::vector<T> out(xv.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
            T s = 0;
            for (std::size_t k = 0; k < len; ++k) {
                const T e = std::exp(xv[base + k * inner] - mx);
                out[base + k * inner] = e;
                s += e;
            }
            for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= s;
        }
    }
    auto y = out;
    return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                  [x, y = std::move(y), outer, inner, len](const std::vector<T>& g) {
                                      auto& gx = x.node()->grad_buffer();
                                      for (std::size_t o = 0; o < outer; ++o) {
                                          for (std::size_t in = 0; in < inner; ++in) {
                                              const std::size_t base = o * len * inner + in;
                                              T dot = 0;
                                              for (std::size_t k = 0; k < len; ++k)
                                                  dot += y[base + k * inner] * g[base + k * inner];
                                              for (std::size_t k = 0; k < len; ++k) {
                                                  const std::size_t e = base + k * inner;
                                                  gx[e] += y[e] * (g[e] - dot);
                                              }
                                          }
                                      }
                                  });
}

// x[..., K] @ w[K, N] -> [..., N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w) {
    detail::require(w.rank() == 2, "matmul: weight must be rank 2, got " + shape_str(w.shape()));
    const std::size_t k = w.dim(0), n = w.dim(1);
    detail::require(x.rank() >= 1 && x.shape().back() == k,
                    "matmul: width mismatch " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
    const std::size_t m = x.numel() / k;
    Shape out_shape = x.shape();
    out_shape.back() = n;
    std::vector<T> out(m * n, T(0));
    kernels::gemm_nn(m, k, n, x.values().data(), w.values().data(), out.data());
    return Tensor<T>::make_result(out_shape, std::move(out), {x, w}, [x, w, m, k, n](const std::vector<T>& g) {
        if (auto* gx = grad_target(x)) kernels::gemm_nt(m, k, n, g.data(), w.values().data(), gx->data());
        if (auto* gw = grad_target(w)) kernels::gemm_tn(m, k, n, x.values().data(), g.data(), gw->data());
    });
}

// x[..., in] @ w[in, out] + b[out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require(w.rank() == 2 && b.rank() == 1 && b.dim(0) == w.dim(1),
                    "linear: weight " + shape_str(w.shape()) + " and bias " + shape_str(b.shape()) + " disagree");
    const std::size_t k = w.dim(0), n = w.dim(1);
    detail::require(x.rank() >= 1 && x.shape().back() == k,
                    "linear: width mismatch " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
    const std::size_t m = x.numel() / k;
    Shape out_shape = x.shape();
    out_shape.back() = n;
    std::vector<T> out(m * n);
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
    kernels::gemm_nn(m, k, n, x.values().data(), w.values().data(), out.data());
    return Tensor<T>::make_result(out_shape, std::move(out), {x, w, b}, [x, w, b, m, k, n](const std::vector<T>& g) {
        if (auto* gx = grad_target(x)) kernels::gemm_nt(m, k, n, g.data(), w.values().data(), gx->data());
        if (auto* gw = grad_target(w)) kernels::gemm_tn(m, k, n, x.values().data(), g.data(), gw->data());
        if (auto* gb = grad_target(b))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
    });
}

// Block-diagonal linear map: the last axis is split into `groups` equal
// slices, each transformed by its own w[g] and b[g].
// x[..., G*in], w[G, in, out], b[G*out] -> [..., G*out]
template <typename T>
Tensor<T> grouped_linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require(w.rank() == 3, "grouped_linear: weight must be [groups, in, out]");
    const std::size_t groups = w.dim(0), kin = w.dim(1), kout = w.dim(2);
    detail::require(b.rank() == 1 && b.dim(0) == groups * kout, "grouped_linear: bias width mismatch");
    detail::require(x.rank() >= 1 && x.shape().back() == groups * kin,
                    "grouped_linear: width mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const std::size_t m = x.numel() / (groups * kin);
    const std::size_t win = groups * kin, wout = groups * kout;
    Shape out_shape = x.shape();
    out_shape.back() = wout;
    std::vector<T> out(m * wout);
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(bv.begin(), bv.end(), out.begin() + i * wout);
        for (std::size_t gi = 0; gi < groups; ++gi) {
            kernels::gemm_nn(1, kin, kout, xv.data() + i * win + gi * kin, wv.data() + gi * kin * kout,
                             out.data() + i * wout + gi * kout);
        }
    }
    return Tensor<T>::make_result(
        out_shape, std::move(out), {x, w, b}, [x, w, b, m, groups, kin, kout](const std::vector<T>& g) {
            const std::size_t win = groups * kin, wout = groups * kout;
            auto* gx = grad_target(x);
            auto* gw = grad_target(w);
            auto* gb = grad_target(b);
            const auto& xv = x.values();
            const auto& wv = w.values();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t gi = 0; gi < groups; ++gi) {
                    const T* grow = g.data() + i * wout + gi * kout;
                    const T* wg = wv.data() + gi * kin * kout;
                    if (gx) {
                        T* gxr = gx->data() + i * win + gi * kin;
                        for (std::size_t p = 0; p < kin; ++p) {
                            T s = 0;
                            for (std::size_t j = 0; j < kout; ++j) s += grow[j] * wg[p * kout + j];
                            gxr[p] += s;
                        }
                    }
                    if (gw) kernels::gemm_tn(1, kin, kout, xv.data() + i * win + gi * kin, grow,
                                             gw->data() + gi * kin * kout);
                    if (gb)
                        for (std::size_t j = 0; j < kout; ++j) (*gb)[gi * kout + j] += grow[j];
                }
            }
        });
}

// Gated linear unit over the last axis: [..., 2D] -> a * sigmoid(b).
template <typename T>
Tensor<T> glu(const Tensor<T>& x) {
    const std::size_t w = detail::last_dim(x.shape());
    detail::require(x.rank() >= 1 && w % 2 == 0, "glu: last axis must be even");
    const std::size_t d = w / 2, rows = x.numel() / w;
    Shape out_shape = x.shape();
    out_shape.back() = d;
    std::vector<T> out(rows * d);
    const auto& xv = x.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            const T s = T(1) / (T(1) + std::exp(-xv[r * w + d + j]));
            out[r * d + j] = xv[r * w + j] * s;
        }
    return Tensor<T>::make_result(out_shape, std::move(out), {x}, [x, rows, d](const std::vector<T>& g) {
        const std::size_t w = 2 * d;
        auto& gx = x.node()->grad_buffer();
        const auto& xv = x.values();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
                const T a = xv[r * w + j];
                const T s = T(1) / (T(1) + std::exp(-xv[r * w + d + j]));
                const T gg = g[r * d + j];
                gx[r * w + j] += gg * s;
                gx[r * w + d + j] += gg * a * s * (T(1) - s);
            }
    });
}

// Normalizes each row of the last axis, then applies gamma and beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    const std::size_t d = detail::last_dim(x.shape());
    detail::require(gamma.numel() == d && beta.numel() == d, "layer_norm: parameter width mismatch");
    const std::size_t rows = x.numel() / d;
    std::vector<T> out(x.numel()), xhat(x.numel()), inv_std(rows);
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = xv.data() + r * d;
        T mu = 0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<T>(d);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (row[j] - mu) * is;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gv[j] + bv[j];
        }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](const std::vector<T>& g) {
            auto* gx = grad_target(x);
            auto* gg = grad_target(gamma);
            auto* gb = grad_target(beta);
            const auto& gv = gamma.values();
            std::vector<T> dh(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* gr = g.data() + r * d;
                const T* hr = xhat.data() + r * d;
                T m1 = 0, m2 = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    dh[j] = gr[j] * gv[j];
                    m1 += dh[j];
                    m2 += dh[j] * hr[j];
                    if (gg) (*gg)[j] += gr[j] * hr[j];
                    if (gb) (*gb)[j] += gr[j];
                }
                if (!gx) continue;
                m1 /= static_cast<T>(d);
                m2 /= static_cast<T>(d);
                for (std::size_t j = 0; j < d; ++j) (*gx)[r * d + j] += inv_std[r] * (dh[j] - m1 - hr[j] * m2);
            }
        });
}

template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& xs) {
    detail::require(!xs.empty(), "concat_last: no inputs");
    const Shape& s0 = xs[0].shape();
    detail::require(!s0.empty(), "concat_last: scalar input");
    const std::size_t rows = xs[0].numel() / s0.back();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& x : xs) {
        detail::require(x.rank() == s0.size() && std::equal(s0.begin(), s0.end() - 1, x.shape().begin()),
                        "concat_last: leading shapes differ");
        widths.push_back(x.shape().back());
        total += x.shape().back();
    }
    Shape out_shape = s0;
    out_shape.back() = total;
    std::vector<T> out(rows * total);
    std::size_t off = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto& xv = xs[i].values();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(xv.begin() + r * widths[i], widths[i], out.begin() + r * total + off);
        off += widths[i];
    }
    return Tensor<T>::make_result(out_shape, std::move(out), xs, [xs, widths, rows, total](const std::vector<T>& g) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (auto* gx = grad_target(xs[i]))
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < widths[i]; ++j) (*gx)[r * widths[i] + j] += g[r * total + off + j];
            off += widths[i];
        }
    });
}

template <typename T>
Tensor<T> slice_last(const Tensor<T>& x, std::size_t start, std::size_t len) {
    const std::size_t w = detail::last_dim(x.shape());
    detail::require(x.rank() >= 1 && start + len <= w, "slice_last: range out of bounds");
    const std::size_t rows = x.numel() / w;
    Shape out_shape = x.shape();
    out_shape.back() = len;
    std::vector<T> out(rows * len);
    const auto& xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.begin() + r * w + start, len, out.begin() + r * len);
    return Tensor<T>::make_result(out_shape, std::move(out), {x}, [x, rows, w, start, len](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < len; ++j) gx[r * w + start + j] += g[r * len + j];
    });
}

// Rows of a [N, D] tensor picked by index (repeats allowed).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
    detail::require(x.rank() == 2, "gather_rows: expected [N, D]");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<T> out(idx.size() * d);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        detail::require(idx[i] < n, "gather_rows: index out of range");
        std::copy_n(xv.begin() + idx[i] * d, d, out.begin() + i * d);
    }
    return Tensor<T>::make_result({idx.size(), d}, std::move(out), {x}, [x, idx, d](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) gx[idx[i] * d + j] += g[i * d + j];
    });
}

// [B, D] -> [B, T, D] by repeating each row over time.
template <typename T>
Tensor<T> repeat_time(const Tensor<T>& x, std::size_t frames) {
    detail::require(x.rank() == 2, "repeat_time: expected [B, D]");
    const std::size_t b = x.dim(0), d = x.dim(1);
    std::vector<T> out(b * frames * d);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t t = 0; t < frames; ++t) std::copy_n(xv.begin() + i * d, d, out.begin() + (i * frames + t) * d);
    return Tensor<T>::make_result({b, frames, d}, std::move(out), {x}, [x, b, frames, d](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t t = 0; t < frames; ++t)
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[(i * frames + t) * d + j];
    });
}

namespace detail {
inline void check_mask(const Shape& s, const FrameMask& mask, const char* who) {
    require(s.size() == 3, std::string(who) + ": expected [B, T, D], got " + shape_str(s));
    require(mask.size() == s[0] * s[1], std::string(who) + ": mask size does not match B*T");
}
} // namespace detail

// Mean over valid frames: [B, T, D] -> [B, D]. Masked positions contribute nothing.
template <typename T>
Tensor<T> masked_time_average(const Tensor<T>& x, const FrameMask& mask) {
    detail::check_mask(x.shape(), mask, "masked_time_average");
    const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
    std::vector<T> out(b * d, T(0));
    std::vector<T> inv_count(b);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t count = 0;
        for (std::size_t k = 0; k < t; ++k) {
            if (!mask[i * t + k]) continue;
            ++count;
            const T* row = xv.data() + (i * t + k) * d;
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] += row[j];
        }
        if (count == 0) {
            throw std::domain_error("masked_time_average: batch row " + std::to_string(i) + " has no valid frame");
        }
        inv_count[i] = T(1) / static_cast<T>(count);
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= inv_count[i];
    }
    return Tensor<T>::make_result({b, d}, std::move(out), {x},
                                  [x, mask, inv_count, b, t, d](const std::vector<T>& g) {
                                      auto& gx = x.node()->grad_buffer();
                                      for (std::size_t i = 0; i < b; ++i)
                                          for (std::size_t k = 0; k < t; ++k) {
                                              if (!mask[i * t + k]) continue;
                                              for (std::size_t j = 0; j < d; ++j)
                                                  gx[(i * t + k) * d + j] += g[i * d + j] * inv_count[i];
                                          }
                                  });
}

// Zeroes every masked-out frame of a [B, T, D] tensor.
template <typename T>
Tensor<T> zero_masked(const Tensor<T>& x, const FrameMask& mask) {
    detail::check_mask(x.shape(), mask, "zero_masked");
    const std::size_t rows = mask.size(), d = x.dim(2);
    std::vector<T> out = x.values();
    for (std::size_t r = 0; r < rows; ++r)
        if (!mask[r]) std::fill_n(out.begin() + r * d, d, T(0));
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [x, mask, rows, d](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            if (mask[r])
                for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += g[r * d + j];
    });
}

// Frames flagged in `selected` are replaced by `embedding` ([D]); others pass through.
template <typename T>
Tensor<T> replace_frames(const Tensor<T>& x, const FrameMask& selected, const Tensor<T>& embedding) {
    detail::check_mask(x.shape(), selected, "replace_frames");
    const std::size_t rows = selected.size(), d = x.dim(2);
    detail::require(embedding.numel() == d, "replace_frames: embedding width mismatch");
    std::vector<T> out = x.values();
    const auto& ev = embedding.values();
    for (std::size_t r = 0; r < rows; ++r)
        if (selected[r]) std::copy(ev.begin(), ev.end(), out.begin() + r * d);
    return Tensor<T>::make_result(x.shape(), std::move(out), {x, embedding},
                                  [x, embedding, selected, rows, d](const std::vector<T>& g) {
                                      auto* gx = grad_target(x);
                                      auto* ge = grad_target(embedding);
                                      for (std::size_t r = 0; r < rows; ++r)
                                          for (std::size_t j = 0; j < d; ++j) {
                                              if (selected[r]) {
                                                  if (ge) (*ge)[j] += g[r * d + j];
                                              } else if (gx) {
                                                  (*gx)[r * d + j] += g[r * d + j];
                                              }
                                          }
                                  });
}

// Inverted dropout; identity when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, RandomStream& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> factor(x.numel());
    for (auto& f : factor) f = rng.uniform() < p ? T(0) : keep_scale;
    std::vector<T> out(x.numel());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor[i];
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [x, factor = std::move(factor)](const std::vector<T>& g) {
        auto& gx = x.node()->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor[i];
    });
}

// Depthwise 1-D convolution over time with same padding and stride 1.
// x[B, T, C], w[K, C], b[C]; K odd.
template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require(x.rank() == 3, "depthwise_conv1d: expected [B, T, C]");
    detail::require(w.rank() == 2 && w.dim(1) == x.dim(2) && w.dim(0) % 2 == 1,
                    "depthwise_conv1d: weight must be [K odd, C]");
    detail::require(b.numel() == x.dim(2), "depthwise_conv1d: bias width mismatch");
    const std::size_t bs = x.dim(0), t = x.dim(1), c = x.dim(2), k = w.dim(0);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    std::vector<T> out(x.numel());
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < bs; ++i)
        for (std::size_t s = 0; s < t; ++s) {
            T* orow = out.data() + (i * t + s) * c;
            std::copy(bv.begin(), bv.end(), orow);
            for (std::size_t q = 0; q < k; ++q) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) + static_cast<std::ptrdiff_t>(q) - pad;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
                const T* xrow = xv.data() + (i * t + static_cast<std::size_t>(src)) * c;
                const T* wrow = wv.data() + q * c;
                for (std::size_t j = 0; j < c; ++j) orow[j] += xrow[j] * wrow[j];
            }
        }
    return Tensor<T>::make_result(x.shape(), std::move(out), {x, w, b}, [x, w, b, bs, t, c, k, pad](const std::vector<T>& g) {
        auto* gx = grad_target(x);
        auto* gw = grad_target(w);
        auto* gb = grad_target(b);
        const auto& xv = x.values();
        const auto& wv = w.values();
        for (std::size_t i = 0; i < bs; ++i)
            for (std::size_t s = 0; s < t; ++s) {
                const T* grow = g.data() + (i * t + s) * c;
                if (gb)
                    for (std::size_t j = 0; j < c; ++j) (*gb)[j] += grow[j];
                for (std::size_t q = 0; q < k; ++q) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s) + static_cast<std::ptrdiff_t>(q) - pad;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
                    const std::size_t xoff = (i * t + static_cast<std::size_t>(src)) * c;
                    for (std::size_t j = 0; j < c; ++j) {
                        if (gx) (*gx)[xoff + j] += grow[j] * wv[q * c + j];
                        if (gw) (*gw)[q * c + j] += grow[j] * xv[xoff + j];
                    }
                }
            }
    });
}

// Output length of a same-padded strided 1-D convolution.
inline std::size_t conv_output_length(std::size_t frames, std::size_t stride) { return (frames + stride - 1) / stride; }

// Dense 1-D convolution over time with same padding: output frame s is centered
// on input frame s*stride. x[B, T, Cin], w[K, Cin, Cout], b[Cout].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride) {
    detail::require(x.rank() == 3, "conv1d: expected [B, T, C]");
    detail::require(w.rank() == 3 && w.dim(1) == x.dim(2), "conv1d: weight must be [K, Cin, Cout] with Cin = " +
                                                               std::to_string(x.dim(2)) + ", got " + shape_str(w.shape()));
    detail::require(b.numel() == w.dim(2), "conv1d: bias width mismatch");
    detail::require(stride >= 1, "conv1d: stride must be positive");
    const std::size_t bs = x.dim(0), t = x.dim(1), cin = x.dim(2), k = w.dim(0), cout = w.dim(2);
    const std::size_t to = conv_output_length(t, stride);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    std::vector<T> out(bs * to * cout);
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    auto source = [=](std::size_t s, std::size_t q) {
        return static_cast<std::ptrdiff_t>(s * stride + q) - pad;
    };
    for (std::size_t i = 0; i < bs; ++i)
        for (std::size_t s = 0; s < to; ++s) {
            T* orow = out.data() + (i * to + s) * cout;
            std::copy(bv.begin(), bv.end(), orow);
            for (std::size_t q = 0; q < k; ++q) {
                const std::ptrdiff_t src = source(s, q);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
                kernels::gemm_nn(1, cin, cout, xv.data() + (i * t + static_cast<std::size_t>(src)) * cin,
                                 wv.data() + q * cin * cout, orow);
            }
        }
    return Tensor<T>::make_result(
        {bs, to, cout}, std::move(out), {x, w, b}, [x, w, b, bs, t, cin, k, cout, to, source](const std::vector<T>& g) {
            auto* gx = grad_target(x);
            auto* gw = grad_target(w);
            auto* gb = grad_target(b);
            const auto& xv = x.values();
            const auto& wv = w.values();
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t s = 0; s < to; ++s) {
                    const T* grow = g.data() + (i * to + s) * cout;
                    if (gb)
                        for (std::size_t j = 0; j < cout; ++j) (*gb)[j] += grow[j];
                    for (std::size_t q = 0; q < k; ++q) {
                        const std::ptrdiff_t src = source(s, q);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
                        const std::size_t xoff = (i * t + static_cast<std::size_t>(src)) * cin;
                        const T* wq = wv.data() + q * cin * cout;
                        if (gx)
                            for (std::size_t p = 0; p < cin; ++p) {
                                T acc = 0;
                                for (std::size_t j = 0; j < cout; ++j) acc += grow[j] * wq[p * cout + j];
                                (*gx)[xoff + p] += acc;
                            }
                        if (gw) kernels::gemm_tn(1, cin, cout, xv.data() + xoff, grow, gw->data() + q * cin * cout);
                    }
                }
        });
}

// Multi-head scaled dot-product attention over [B, T, D] projections. Heads
// occupy consecutive column blocks of width D / heads. Keys at masked frames
// receive zero weight (the additive -inf limit). When recording, the
// [B, H, T, T] probabilities are kept for the backward pass; otherwise rows are
// streamed. `probs_out`, if given, receives the probabilities.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const FrameMask& mask,
                    std::size_t heads, std::vector<T>* probs_out = nullptr) {
    detail::check_mask(q.shape(), mask, "attention");
    detail::require(k.shape() == q.shape() && v.shape() == q.shape(), "attention: q, k, v shapes differ");
    const std::size_t bs = q.dim(0), t = q.dim(1), d = q.dim(2);
    detail::require(heads >= 1 && d % heads == 0, "attention: width " + std::to_string(d) +
                                                      " not divisible by " + std::to_string(heads) + " heads");
    const std::size_t dh = d / heads;
    const T sc = T(1) / std::sqrt(static_cast<T>(dh));
    for (std::size_t i = 0; i < bs; ++i) {
        bool any = false;
        for (std::size_t s = 0; s < t; ++s) any = any || mask[i * t + s];
        if (!any) throw std::domain_error("attention: batch row " + std::to_string(i) + " has no valid key");
    }
    const bool keep = (grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad())) || probs_out;
    std::vector<T> probs;
    if (keep) {
        probs.assign(bs * heads * t * t, T(0));
        if (grad_enabled()) record_activation(probs.size());
    }
    std::vector<T> out(bs * t * d, T(0));
    const auto& qv = q.values();
    const auto& kv = k.values();
    const auto& vv = v.values();
    std::vector<T> kt(dh * t), vh(t * dh), row(t);
    for (std::size_t i = 0; i < bs; ++i) {
        const std::uint8_t* m = mask.data() + i * t;
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t s = 0; s < t; ++s)
                for (std::size_t e = 0; e < dh; ++e) {
                    kt[e * t + s] = kv[(i * t + s) * d + h * dh + e];
                    vh[s * dh + e] = vv[(i * t + s) * d + h * dh + e];
                }
            for (std::size_t a = 0; a < t; ++a) {
                T* p = keep ? probs.data() + ((i * heads + h) * t + a) * t : row.data();
                std::fill_n(p, t, T(0));
                const T* qa = qv.data() + (i * t + a) * d + h * dh;
                for (std::size_t e = 0; e < dh; ++e) {
                    const T qe = qa[e] * sc;
                    const T* krow = kt.data() + e * t;
                    for (std::size_t s = 0; s < t; ++s) p[s] += qe * krow[s];
                }
                T mx = -std::numeric_limits<T>::infinity();
                for (std::size_t s = 0; s < t; ++s)
                    if (m[s]) mx = std::max(mx, p[s]);
                T total = 0;
                for (std::size_t s = 0; s < t; ++s) {
                    p[s] = m[s] ? std::exp(p[s] - mx) : T(0);
                    total += p[s];
                }
                const T inv = T(1) / total;
                T* orow = out.data() + (i * t + a) * d + h * dh;
                for (std::size_t s = 0; s < t; ++s) {
                    p[s] *= inv;
                    const T ps = p[s];
                    if (ps == T(0)) continue;
                    const T* vrow = vh.data() + s * dh;
                    for (std::size_t e = 0; e < dh; ++e) orow[e] += ps * vrow[e];
                }
            }
        }
    }
    if (probs_out) *probs_out = probs;
    return Tensor<T>::make_result(
        q.shape(), std::move(out), {q, k, v},
        [q, k, v, probs = std::move(probs), bs, t, d, heads, dh, sc](const std::vector<T>& g) {
            auto* gq = grad_target(q);
            auto* gk = grad_target(k);
            auto* gv = grad_target(v);
            const auto& qv = q.values();
            const auto& kv = k.values();
            const auto& vv = v.values();
            std::vector<T> vt(dh * t), dp(t);
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t h = 0; h < heads; ++h) {
                    for (std::size_t s = 0; s < t; ++s)
                        for (std::size_t e = 0; e < dh; ++e) vt[e * t + s] = vv[(i * t + s) * d + h * dh + e];
                    for (std::size_t a = 0; a < t; ++a) {
                        const T* p = probs.data() + ((i * heads + h) * t + a) * t;
                        const T* ga = g.data() + (i * t + a) * d + h * dh;
                        std::fill(dp.begin(), dp.end(), T(0));
                        for (std::size_t e = 0; e < dh; ++e) {
                            const T ge = ga[e];
                            const T* vrow = vt.data() + e * t;
                            for (std::size_t s = 0; s < t; ++s) dp[s] += ge * vrow[s];
                        }
                        T dot = 0;
                        for (std::size_t s = 0; s < t; ++s) dot += p[s] * dp[s];
                        const T* qa = qv.data() + (i * t + a) * d + h * dh;
                        for (std::size_t s = 0; s < t; ++s) {
                            if (p[s] == T(0)) continue;
                            const std::size_t off = (i * t + s) * d + h * dh;
                            if (gv)
                                for (std::size_t e = 0; e < dh; ++e) (*gv)[off + e] += p[s] * ga[e];
                            const T ds = p[s] * (dp[s] - dot) * sc;
                            if (gq)
                                for (std::size_t e = 0; e < dh; ++e)
                                    (*gq)[(i * t + a) * d + h * dh + e] += ds * kv[off + e];
                            if (gk)
                                for (std::size_t e = 0; e < dh; ++e) (*gk)[off + e] += ds * qa[e];
                        }
                    }
                }
        });
}

// Cosine similarity of row a[ia[p]] with row b[ib[p]] for every pair p.
template <typename T>
Tensor<T> cosine_pairs(const Tensor<T>& a, const Tensor<T>& b, const std::vector<std::size_t>& ia,
                       const std::vector<std::size_t>& ib) {
    detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), "cosine_pairs: expected [N, D] and [M, D]");
    detail::require(ia.size() == ib.size(), "cosine_pairs: index lists differ in length");
    const std::size_t d = a.dim(1);
    const T floor = T(1e-12);
    auto norms = [&](const Tensor<T>& x) {
        std::vector<T> nv(x.dim(0));
        const auto& xv = x.values();
        for (std::size_t r = 0; r < nv.size(); ++r) {
            T s = 0;
            for (std::size_t j = 0; j < d; ++j) s += xv[r * d + j] * xv[r * d + j];
            nv[r] = std::max(std::sqrt(s), floor);
        }
        return nv;
    };
    auto na = norms(a), nb = norms(b);
    std::vector<T> out(ia.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t p = 0; p < ia.size(); ++p) {
        detail::require(ia[p] < a.dim(0) && ib[p] < b.dim(0), "cosine_pairs: index out of range");
        T dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += av[ia[p] * d + j] * bv[ib[p] * d + j];
        out[p] = dot / (na[ia[p]] * nb[ib[p]]);
    }
    auto cosv = out;
    return Tensor<T>::make_result(
        {ia.size()}, std::move(out), {a, b},
        [a, b, ia, ib, na = std::move(na), nb = std::move(nb), cosv = std::move(cosv), d](const std::vector<T>& g) {
            auto* ga = grad_target(a);
            auto* gb = grad_target(b);
            const auto& av = a.values();
            const auto& bv = b.values();
            for (std::size_t p = 0; p < ia.size(); ++p) {
                const T* x = av.data() + ia[p] * d;
                const T* y = bv.data() + ib[p] * d;
                const T nx = na[ia[p]], ny = nb[ib[p]], c = cosv[p], gp = g[p];
                for (std::size_t j = 0; j < d; ++j) {
                    if (ga) (*ga)[ia[p] * d + j] += gp * (y[j] / (nx * ny) - c * x[j] / (nx * nx));
                    if (gb) (*gb)[ib[p] * d + j] += gp * (x[j] / (nx * ny) - c * y[j] / (ny * ny));
                }
            }
        });
}

// Mean over segments of -log softmax(segment)[0]; segment s spans
// logits[offsets[s], offsets[s+1]) and its first entry is the target.
template <typename T>
Tensor<T> segment_first_xent(const Tensor<T>& logits, const std::vector<std::size_t>& offsets) {
    detail::require(logits.rank() == 1, "segment_first_xent: logits must be rank 1");
    detail::require(offsets.size() >= 2 && offsets.back() == logits.numel(), "segment_first_xent: bad offsets");
    const std::size_t segs = offsets.size() - 1;
    const auto& lv = logits.values();
    std::vector<T> soft(lv.size());
    T total = 0;
    for (std::size_t s = 0; s < segs; ++s) {
        const std::size_t lo = offsets[s], hi = offsets[s + 1];
        detail::require(hi > lo, "segment_first_xent: empty segment");
        T mx = lv[lo];
        for (std::size_t e = lo; e < hi; ++e) mx = std::max(mx, lv[e]);
        T z = 0;
        for (std::size_t e = lo; e < hi; ++e) {
            soft[e] = std::exp(lv[e] - mx);
            z += soft[e];
        }
        for (std::size_t e = lo; e < hi; ++e) soft[e] /= z;
        total += (std::log(z) + mx) - lv[lo];
    }
    const T inv = T(1) / static_cast<T>(segs);
    return Tensor<T>::make_result({}, {total * inv}, {logits},
                                  [logits, offsets, soft = std::move(soft), inv, segs](const std::vector<T>& g) {
                                      auto& gl = logits.node()->grad_buffer();
                                      for (std::size_t s = 0; s < segs; ++s)
                                          for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e)
                                              gl[e] += g[0] * inv * (soft[e] - (e == offsets[s] ? T(1) : T(0)));
                                  });
}

// Mean cross-entropy of logits[N, C] against integer labels.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
    detail::require(logits.rank() == 2 && logits.dim(0) == labels.size(), "cross_entropy: expected [N, C] and N labels");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    std::vector<std::size_t> offsets(n + 1);
    std::vector<std::size_t> order(n * c);
    // Reorder each row so that its label comes first, then reuse segment_first_xent.
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(labels[i] < c, "cross_entropy: label out of range");
        offsets[i] = i * c;
        order[i * c] = i * c + labels[i];
        std::size_t w = 1;
        for (std::size_t j = 0; j < c; ++j)
            if (j != labels[i]) order[i * c + w++] = i * c + j;
    }
    offsets[n] = n * c;
    auto flat = reshape(logits, {n * c, 1});
    auto permuted = reshape(gather_rows(flat, order), {n * c});
    return segment_first_xent(permuted, offsets);
}

// Per-group one-hot of the argmax in the forward pass; the gradient flows to
// the soft input unchanged (straight-through). x[N, G*V].
template <typename T>
Tensor<T> straight_through_onehot(const Tensor<T>& x, std::size_t groups) {
    detail::require(x.rank() == 2 && groups >= 1 && x.dim(1) % groups == 0, "straight_through_onehot: bad shape");
    const std::size_t n = x.dim(0), gv = x.dim(1), v = gv / groups;
    std::vector<T> out(x.numel(), T(0));
    const auto& xv = x.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t g = 0; g < groups; ++g) {
            const T* row = xv.data() + i * gv + g * v;
            const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + v) - row);
            out[i * gv + g * v + best] = T(1);
        }
    return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                  [x](const std::vector<T>& g) { accumulate_grad(x, std::span<const T>(g)); });
}

// sum_l w[l] * xs[l]; all xs share one shape.
template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& xs, const Tensor<T>& w) {
    detail::require(!xs.empty() && w.numel() == xs.size(), "weighted_sum: need one weight per input");
    const Shape& s0 = xs[0].shape();
    for (const auto& x : xs) detail::require(x.shape() == s0, "weighted_sum: input shapes differ");
    std::vector<T> out(xs[0].numel(), T(0));
    const auto& wv = w.values();
    for (std::size_t l = 0; l < xs.size(); ++l) {
        const auto& xv = xs[l].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += wv[l] * xv[i];
    }
    std::vector<Tensor<T>> parents = xs;
    parents.push_back(w);
    return Tensor<T>::make_result(s0, std::move(out), parents, [xs, w](const std::vector<T>& g) {
        auto* gw = grad_target(w);
        const auto& wv = w.values();
        for (std::size_t l = 0; l < xs.size(); ++l) {
            const auto& xv = xs[l].values();
            if (gw) {
                T s = 0;
                for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * xv[i];
                (*gw)[l] += s;
            }
            if (auto* gx = grad_target(xs[l]))
                for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * wv[l];
        }
    });
}

} // namespace ops
} // namespace summix

#endif
