#include "kernel_table.hpp"

#include <cmath>

namespace vhn::simd::detail {

namespace {

void gemm_nn(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* W, double* C)
{
    for (std::size_t j = 0; j < b; ++j) {
        double* c = C + j * rows;
        for (std::size_t r = 0; r < rows; ++r) c[r] = 0.0;
        for (std::size_t k = 0; k < a; ++k) {
            const double w = W[k + j * a];
            const double* x = A + k * rows;
            for (std::size_t r = 0; r < rows; ++r) c[r] += w * x[r];
        }
    }
}

void gemm_tn(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* B, double* G)
{
    for (std::size_t j = 0; j < b; ++j) {
        const double* y = B + j * rows;
        for (std::size_t k = 0; k < a; ++k) {
            const double* x = A + k * rows;
            double s = 0.0;
            for (std::size_t r = 0; r < rows; ++r) s += x[r] * y[r];
            G[k + j * a] = s;
        }
    }
}

void cgemm_nn(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* C, Complex* Out)
{
    for (std::size_t j = 0; j < c; ++j) {
        Complex* o = Out + j * n;
        for (std::size_t r = 0; r < n; ++r) o[r] = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const double cr = C[m + j * k].real();
            const double ci = C[m + j * k].imag();
            const Complex* p = Phi + m * n;
            for (std::size_t r = 0; r < n; ++r) {
                const double pr = p[r].real();
                const double pi = p[r].imag();
                o[r] = Complex(o[r].real() + pr * cr - pi * ci, o[r].imag() + pi * cr + pr * ci);
            }
        }
    }
}

void cgemm_cn(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* X, Complex* Out)
{
    for (std::size_t j = 0; j < c; ++j) {
        const Complex* x = X + j * n;
        for (std::size_t m = 0; m < k; ++m) {
            const Complex* p = Phi + m * n;
            double re = 0.0;
            double im = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                re += p[r].real() * x[r].real() + p[r].imag() * x[r].imag();
                im += p[r].real() * x[r].imag() - p[r].imag() * x[r].real();
            }
            Out[m + j * k] = Complex(re, im);
        }
    }
}

void magnitude_relu(std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard, Complex* X)
{
    for (std::size_t j = 0; j < cols; ++j) {
        const double b = bias[j];
        for (std::size_t r = 0; r < rows; ++r) {
            const Complex z = Z[r + j * rows];
            const double mag = std::sqrt(z.real() * z.real() + z.imag() * z.imag());
            double f = 0.0;
            if (mag > guard) f = std::max(mag - b, 0.0) / mag;
            X[r + j * rows] = Complex(z.real() * f, z.imag() * f);
        }
    }
}

void magnitude_relu_backward(
    std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard,
    const Complex* dX, Complex* dZ, double* dbias)
{
    for (std::size_t j = 0; j < cols; ++j) {
        const double b = bias[j];
        double db = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t i = r + j * rows;
            const Complex z = Z[i];
            const double mag = std::sqrt(z.real() * z.real() + z.imag() * z.imag());
            if (!(mag > guard) || !(mag > b)) {
                dZ[i] = 0.0;
                continue;
            }
            const double ux = z.real() / mag;
            const double uy = z.imag() / mag;
            const double gx = dX[i].real();
            const double gy = dX[i].imag();
            const double proj = ux * gx + uy * gy;
            const double s = b / mag;
            dZ[i] = Complex(gx - s * (gx - ux * proj), gy - s * (gy - uy * proj));
            db -= proj;
        }
        dbias[j] += db;
    }
}

} // namespace

const KernelTable& scalar_kernels()
{
    static const KernelTable table{
        &gemm_nn, &gemm_tn, &cgemm_nn, &cgemm_cn, &magnitude_relu, &magnitude_relu_backward};
    return table;
}

} // namespace vhn::simd::detail
