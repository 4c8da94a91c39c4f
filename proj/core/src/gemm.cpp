#include "gemm.hpp"

#include <cblas.h>

#include <mutex>

extern "C" void openblas_set_num_threads(int);

namespace pixelreg::net {

namespace {
std::once_flag blas_threads_once;
}

void gemm(bool transa, bool transb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  std::call_once(blas_threads_once, [] { openblas_set_num_threads(1); });
  cblas_dgemm(CblasRowMajor, transa ? CblasTrans : CblasNoTrans,
              transb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace pixelreg::net
