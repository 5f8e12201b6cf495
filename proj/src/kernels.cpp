#include "treeattn/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace treeattn::kernels {

namespace {

inline Scalar fetch(const Scalar* p, std::size_t r, std::size_t c,
                    std::size_t rows, std::size_t cols, bool trans) {
  // (rows x cols) is the logical shape after transposition.
  (void)rows;
  return trans ? p[c * rows + r] : p[r * cols + c];
}

template <typename Body>
void matmul_rows(std::size_t m, std::size_t n, std::size_t k,
                 const Scalar* a, bool trans_a,
                 const Scalar* b, bool trans_b,
                 Scalar* c, bool accumulate, Body&& for_each_row) {
  for_each_row(m, [=](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += fetch(a, i, p, m, k, trans_a) * fetch(b, p, j, k, n, trans_b);
      }
      Scalar* out = c + i * n + j;
      if (accumulate) {
        *out += acc;
      } else {
        *out = acc;
      }
    }
  });
}

}  // namespace

void matmul_serial(std::size_t m, std::size_t n, std::size_t k,
                   const Scalar* a, bool trans_a,
                   const Scalar* b, bool trans_b,
                   Scalar* c, bool accumulate) {
  matmul_rows(m, n, k, a, trans_a, b, trans_b, c, accumulate,
              [](std::size_t rows, auto&& body) {
                for (std::size_t i = 0; i < rows; ++i) body(i);
              });
}

void matmul_parallel(std::size_t m, std::size_t n, std::size_t k,
                     const Scalar* a, bool trans_a,
                     const Scalar* b, bool trans_b,
                     Scalar* c, bool accumulate) {
#ifdef _OPENMP
  matmul_rows(m, n, k, a, trans_a, b, trans_b, c, accumulate,
              [](std::size_t rows, auto&& body) {
#pragma omp parallel for schedule(static)
                for (long long i = 0; i < static_cast<long long>(rows); ++i) {
                  body(static_cast<std::size_t>(i));
                }
              });
#else
  matmul_serial(m, n, k, a, trans_a, b, trans_b, c, accumulate);
#endif
}

void matmul(std::size_t m, std::size_t n, std::size_t k,
            const Scalar* a, bool trans_a,
            const Scalar* b, bool trans_b,
            Scalar* c, bool accumulate) {
#ifdef _OPENMP
  // Threshold measured with bench_kernels; forking for small mat-vec
  // products (the common case at hidden size 100) is a net loss.
  if (m * n * k >= 1u << 18 && !omp_in_parallel()) {
    matmul_parallel(m, n, k, a, trans_a, b, trans_b, c, accumulate);
    return;
  }
#endif
  matmul_serial(m, n, k, a, trans_a, b, trans_b, c, accumulate);
}

void tanh_serial(std::size_t n, const Scalar* x, Scalar* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_parallel(std::size_t n, const Scalar* x, Scalar* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    y[i] = std::tanh(x[i]);
  }
#else
  tanh_serial(n, x, y);
#endif
}

void sigmoid_serial(std::size_t n, const Scalar* x, Scalar* y) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = Scalar(1) / (Scalar(1) + std::exp(-x[i]));
  }
}

void sigmoid_parallel(std::size_t n, const Scalar* x, Scalar* y) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    y[i] = Scalar(1) / (Scalar(1) + std::exp(-x[i]));
  }
#else
  sigmoid_serial(n, x, y);
#endif
}

}  // namespace treeattn::kernels
