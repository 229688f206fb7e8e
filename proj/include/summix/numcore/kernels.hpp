// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_NUMCORE_KERNELS_HPP
#define SUMMIX_NUMCORE_KERNELS_HPP

#include <cstddef>
#include <vector>

// Dense row-major loops. The inner loops are written in axpy form so the
// compiler can vectorize them without reassociating reductions.
namespace summix::kernels {

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[K,N] += A[M,K]^T * G[M,N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* g, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

template <typename T>
std::vector<T> transpose(std::size_t rows, std::size_t cols, const T* src) {
    std::vector<T> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    return out;
}

// C[M,K] += G[M,N] * B[K,N]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* g, const T* b, T* c) {
    const auto bt = transpose(k, n, b);
    gemm_nn(m, n, k, g, bt.data(), c);
}

} // namespace summix::kernels

#endif
