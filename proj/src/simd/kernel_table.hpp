#pragma once

// Raw kernel entry points. Matrices are column-major and contiguous; complex
// arrays are interleaved (re, im) pairs.

#include <complex>
#include <cstddef>

namespace vhn::simd::detail {

using Complex = std::complex<double>;

struct KernelTable
{
    /// C(rows x b) = A(rows x a) * W(a x b)
    void (*gemm_nn)(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* W, double* C);
    /// G(a x b) = A(rows x a)^T * B(rows x b)
    void (*gemm_tn)(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* B, double* G);
    /// Out(n x c) = Phi(n x k) * C(k x c)
    void (*cgemm_nn)(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* C, Complex* Out);
    /// Out(k x c) = Phi(n x k)^H * X(n x c)
    void (*cgemm_cn)(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* X, Complex* Out);
    void (*magnitude_relu)(std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard, Complex* X);
    /// dbias is accumulated, dZ overwritten.
    void (*magnitude_relu_backward)(
        std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard,
        const Complex* dX, Complex* dZ, double* dbias);
};

const KernelTable& scalar_kernels();
#if defined(VHN_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

} // namespace vhn::simd::detail
