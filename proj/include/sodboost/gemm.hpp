#pragma once

#include <cstdint>
#include <vector>

#include "sodboost/parallel.hpp"

namespace sodboost {

// Row-major GEMM kernels. All three variants walk k in a fixed order for any
// given output element, so results do not depend on the thread count. Rows of
// C are independent, which is the only axis that gets parallelized.

// C(M,N) = A(M,K) * B(K,N)   (+= when accumulate)
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate) {
    parallel_for(M, [&](int64_t i) {
        T* c = C + i * N;
        if (!accumulate) {
            for (int j = 0; j < N; ++j) c[j] = T(0);
        }
        const T* arow = A + i * K;
        for (int k = 0; k < K; ++k) {
            const T a = arow[k];
            const T* brow = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += a * brow[j];
        }
    });
}

// C(M,N) = A(M,K) * B^T where B is given as (N,K). Large inputs first
// transpose B into a scratch buffer so the accumulation runs through the
// axpy kernel; the per-element k order is the same either way.
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate) {
    const int64_t work = static_cast<int64_t>(M) * K * N;
    if (work >= (1 << 16)) {
        std::vector<T> bt(static_cast<size_t>(K) * N);
        parallel_for(K, [&](int64_t k) {
            T* dst = bt.data() + k * N;
            for (int j = 0; j < N; ++j) dst[j] = B[static_cast<int64_t>(j) * K + k];
        });
        gemm_nn(A, bt.data(), C, M, K, N, accumulate);
        return;
    }
    parallel_for(M, [&](int64_t i) {
        const T* arow = A + i * K;
        T* c = C + i * N;
        for (int j = 0; j < N; ++j) {
            const T* brow = B + static_cast<int64_t>(j) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            c[j] = accumulate ? c[j] + acc : acc;
        }
    });
}

// C(M,N) = A^T * B where A is given as (K,M)
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate) {
    parallel_for(M, [&](int64_t i) {
        T* c = C + i * N;
        if (!accumulate) {
            for (int j = 0; j < N; ++j) c[j] = T(0);
        }
        for (int k = 0; k < K; ++k) {
            const T a = A[static_cast<int64_t>(k) * M + i];
            const T* brow = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += a * brow[j];
        }
    });
}

}  // namespace sodboost
