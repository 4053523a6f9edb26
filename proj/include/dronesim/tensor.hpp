#pragma once

#include <cstddef>
#include <vector>

#include "dronesim/thread_pool.hpp"

namespace dronesim {

// Row-major dense matrix of doubles.
struct Mat {
    std::vector<double> d;
    int rows = 0, cols = 0;

    Mat() = default;
    Mat(int r, int c) { resize(r, c); }

    // Keeps capacity when shrinking; contents are unspecified after resize.
    void resize(int r, int c) {
        rows = r;
        cols = c;
        d.resize(static_cast<std::size_t>(r) * c);
    }
    void zero() { std::fill(d.begin(), d.end(), 0.0); }

    double* row(int i) { return d.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return d.data() + static_cast<std::size_t>(i) * cols; }
    double& at(int i, int j) { return d[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return d[static_cast<std::size_t>(i) * cols + j]; }
    std::size_t size() const { return d.size(); }
};

// C[M,N] = (accumulate ? C : 0) + A[M,K] · B[K,N].
// Output rows are partitioned across threads; the accumulation order within a
// row is fixed, so results are bit-identical for any worker count.
void gemm_nn(const double* A, const double* B, double* C, int M, int K, int N, bool accumulate,
             ThreadPool* pool);

// C[K,N] = (accumulate ? C : 0) + A[M,K]ᵀ · B[M,N]. Same determinism contract
// (partitioned over output rows k).
void gemm_tn(const double* A, const double* B, double* C, int M, int K, int N, bool accumulate,
             ThreadPool* pool);

// out[N,M] = inᵀ for in[M,N].
void transpose(const double* in, double* out, int M, int N);

}  // namespace dronesim
