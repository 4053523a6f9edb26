#include "dronesim/tensor.hpp"

#include <algorithm>
#include <cstring>

namespace dronesim {

namespace {

// IR×JT register-blocked micro-kernel: C[rows i0..i0+IR) × cols j0..j0+JT)
// accumulated over the full k extent. TRANS_A selects the operand walk at
// compile time so both gemm_nn and gemm_tn get contiguous vector loads.
// Accumulation order over k is fixed, so results do not depend on the thread
// partition.
template <int IR, int JT, bool TRANS_A>
void micro_kernel(const double* __restrict A, std::size_t lda, const double* __restrict B,
                  std::size_t ldb, double* __restrict C, std::size_t ldc, std::size_t i0, int j0,
                  int kk, bool accumulate) {
    double acc[IR][JT];
    if (accumulate) {
        for (int r = 0; r < IR; ++r) {
            const double* c = C + (i0 + r) * ldc + j0;
            for (int j = 0; j < JT; ++j) acc[r][j] = c[j];
        }
    } else {
        for (int r = 0; r < IR; ++r) {
            for (int j = 0; j < JT; ++j) acc[r][j] = 0.0;
        }
    }
    const double* b = B + j0;
    for (int k = 0; k < kk; ++k, b += ldb) {
        for (int r = 0; r < IR; ++r) {
            const double v = TRANS_A ? A[static_cast<std::size_t>(k) * lda + i0 + r]
                                     : A[(i0 + r) * lda + k];
            for (int j = 0; j < JT; ++j) acc[r][j] += v * b[j];
        }
    }
    for (int r = 0; r < IR; ++r) {
        double* c = C + (i0 + r) * ldc + j0;
        for (int j = 0; j < JT; ++j) c[j] = acc[r][j];
    }
}

template <int IR, bool TRANS_A>
void row_block(const double* A, std::size_t lda, const double* B, std::size_t ldb, double* C,
               std::size_t ldc, std::size_t i0, int N, int kk, bool accumulate) {
    int j0 = 0;
    for (; j0 + 24 <= N; j0 += 24) {
        micro_kernel<IR, 24, TRANS_A>(A, lda, B, ldb, C, ldc, i0, j0, kk, accumulate);
    }
    for (; j0 + 8 <= N; j0 += 8) {
        micro_kernel<IR, 8, TRANS_A>(A, lda, B, ldb, C, ldc, i0, j0, kk, accumulate);
    }
    for (; j0 < N; ++j0) {
        micro_kernel<IR, 1, TRANS_A>(A, lda, B, ldb, C, ldc, i0, j0, kk, accumulate);
    }
}

// Partition output rows into ranges aligned to the 8-row block so the
// (block, tail) split depends only on global indices, never on workers.
template <class Body>
void run_rows(ThreadPool* pool, std::size_t rows, const Body& body) {
    std::size_t chunk = rows / 16;
    chunk = std::max<std::size_t>(std::size_t{8}, chunk - chunk % 8);
    maybe_parallel_for(pool, rows, body, chunk);
}

template <bool TRANS_A>
void gemm_any(const double* A, std::size_t lda, const double* B, std::size_t ldb, double* C,
              int out_rows, int kk, int N, bool accumulate, ThreadPool* pool) {
    auto body = [&](std::size_t ib, std::size_t ie) {
        std::size_t i = ib;
        for (; i + 8 <= ie; i += 8) {
            row_block<8, TRANS_A>(A, lda, B, ldb, C, static_cast<std::size_t>(N), i, N, kk,
                                  accumulate);
        }
        for (; i < ie; ++i) {
            row_block<1, TRANS_A>(A, lda, B, ldb, C, static_cast<std::size_t>(N), i, N, kk,
                                  accumulate);
        }
    };
    run_rows(pool, static_cast<std::size_t>(out_rows), body);
}

}  // namespace

void gemm_nn(const double* A, const double* B, double* C, int M, int K, int N, bool accumulate,
             ThreadPool* pool) {
    gemm_any<false>(A, static_cast<std::size_t>(K), B, static_cast<std::size_t>(N), C, M, K, N,
                    accumulate, pool);
}

void gemm_tn(const double* A, const double* B, double* C, int M, int K, int N, bool accumulate,
             ThreadPool* pool) {
    // C[k, n] = Σ_m A[m, k] B[m, n]: walk A transposed. The reduction runs in
    // m-blocks so the operand panels stay cache-resident; partial sums land in
    // C in ascending m order, bit-identical to one continuous pass.
    constexpr int kBlockM = 384;
    for (int m0 = 0; m0 < M; m0 += kBlockM) {
        const int mc = std::min(kBlockM, M - m0);
        gemm_any<true>(A + static_cast<std::size_t>(m0) * K, static_cast<std::size_t>(K),
                       B + static_cast<std::size_t>(m0) * N, static_cast<std::size_t>(N), C, K,
                       mc, N, accumulate || m0 > 0, pool);
    }
}

void transpose(const double* in, double* out, int M, int N) {
    constexpr int kBlock = 32;
    for (int i0 = 0; i0 < M; i0 += kBlock) {
        const int i1 = i0 + kBlock < M ? i0 + kBlock : M;
        for (int j0 = 0; j0 < N; j0 += kBlock) {
            const int j1 = j0 + kBlock < N ? j0 + kBlock : N;
            for (int i = i0; i < i1; ++i) {
                for (int j = j0; j < j1; ++j) {
                    out[static_cast<std::size_t>(j) * M + i] =
                        in[static_cast<std::size_t>(i) * N + j];
                }
            }
        }
    }
}

}  // namespace dronesim
