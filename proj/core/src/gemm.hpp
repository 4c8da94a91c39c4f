#pragma once

namespace pixelreg::net {

// Row-major C[m x n] = alpha * op(A) * op(B) + beta * C. BLAS threading is
// pinned to one thread; batch parallelism happens at the sample level.
void gemm(bool transa, bool transb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

}  // namespace pixelreg::net
