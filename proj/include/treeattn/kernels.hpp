#pragma once

#include <cstddef>

namespace treeattn {

#ifdef TREEATTN_USE_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

namespace kernels {

// C[m x n] (+)= op(A) * op(B) where op is optional transpose.
// A is stored row-major with logical shape (m x k) after transposition,
// B likewise (k x n). Both variants produce bitwise-identical results:
// the parallel version splits over output rows only, so the per-element
// summation order never changes.
void matmul_serial(std::size_t m, std::size_t n, std::size_t k,
                   const Scalar* a, bool trans_a,
                   const Scalar* b, bool trans_b,
                   Scalar* c, bool accumulate);

void matmul_parallel(std::size_t m, std::size_t n, std::size_t k,
                     const Scalar* a, bool trans_a,
                     const Scalar* b, bool trans_b,
                     Scalar* c, bool accumulate);

// Dispatches to the parallel kernel when the work is large enough to pay
// for the fork, otherwise runs serially.
void matmul(std::size_t m, std::size_t n, std::size_t k,
            const Scalar* a, bool trans_a,
            const Scalar* b, bool trans_b,
            Scalar* c, bool accumulate);

void tanh_serial(std::size_t n, const Scalar* x, Scalar* y);
void tanh_parallel(std::size_t n, const Scalar* x, Scalar* y);

void sigmoid_serial(std::size_t n, const Scalar* x, Scalar* y);
void sigmoid_parallel(std::size_t n, const Scalar* x, Scalar* y);

}  // namespace kernels
}  // namespace treeattn
