// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// only reached after a runtime CPU check.

#include "kernel_table.hpp"

#include <immintrin.h>

#include <cmath>

namespace vhn::simd::detail {

namespace {

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

/// [e0 - e1 + e2 - e3]
inline double hsub_alternating(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_sub_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nn(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* W, double* C)
{
    std::size_t j = 0;
    for (; j + 4 <= b; j += 4) {
        const double* w0 = W + (j + 0) * a;
        const double* w1 = W + (j + 1) * a;
        const double* w2 = W + (j + 2) * a;
        const double* w3 = W + (j + 3) * a;
        double* c0 = C + (j + 0) * rows;
        double* c1 = C + (j + 1) * rows;
        double* c2 = C + (j + 2) * rows;
        double* c3 = C + (j + 3) * rows;
        std::size_t r = 0;
        for (; r + 8 <= rows; r += 8) {
            __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
            __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
            __m256d s20 = _mm256_setzero_pd(), s21 = _mm256_setzero_pd();
            __m256d s30 = _mm256_setzero_pd(), s31 = _mm256_setzero_pd();
            for (std::size_t k = 0; k < a; ++k) {
                const double* x = A + k * rows + r;
                const __m256d x0 = _mm256_loadu_pd(x);
                const __m256d x1 = _mm256_loadu_pd(x + 4);
                __m256d w = _mm256_broadcast_sd(w0 + k);
                s00 = _mm256_fmadd_pd(x0, w, s00);
                s01 = _mm256_fmadd_pd(x1, w, s01);
                w = _mm256_broadcast_sd(w1 + k);
                s10 = _mm256_fmadd_pd(x0, w, s10);
                s11 = _mm256_fmadd_pd(x1, w, s11);
                w = _mm256_broadcast_sd(w2 + k);
                s20 = _mm256_fmadd_pd(x0, w, s20);
                s21 = _mm256_fmadd_pd(x1, w, s21);
                w = _mm256_broadcast_sd(w3 + k);
                s30 = _mm256_fmadd_pd(x0, w, s30);
                s31 = _mm256_fmadd_pd(x1, w, s31);
            }
            _mm256_storeu_pd(c0 + r, s00);
            _mm256_storeu_pd(c0 + r + 4, s01);
            _mm256_storeu_pd(c1 + r, s10);
            _mm256_storeu_pd(c1 + r + 4, s11);
            _mm256_storeu_pd(c2 + r, s20);
            _mm256_storeu_pd(c2 + r + 4, s21);
            _mm256_storeu_pd(c3 + r, s30);
            _mm256_storeu_pd(c3 + r + 4, s31);
        }
        for (; r < rows; ++r) {
            double t0 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0;
            for (std::size_t k = 0; k < a; ++k) {
                const double x = A[k * rows + r];
                t0 += x * w0[k];
                t1 += x * w1[k];
                t2 += x * w2[k];
                t3 += x * w3[k];
            }
            c0[r] = t0;
            c1[r] = t1;
            c2[r] = t2;
            c3[r] = t3;
        }
    }
    for (; j < b; ++j) {
        const double* w0 = W + j * a;
        double* c0 = C + j * rows;
        std::size_t r = 0;
        for (; r + 8 <= rows; r += 8) {
            __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
            for (std::size_t k = 0; k < a; ++k) {
                const double* x = A + k * rows + r;
                const __m256d w = _mm256_broadcast_sd(w0 + k);
                s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x), w, s0);
                s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + 4), w, s1);
            }
            _mm256_storeu_pd(c0 + r, s0);
            _mm256_storeu_pd(c0 + r + 4, s1);
        }
        for (; r < rows; ++r) {
            double t = 0.0;
            for (std::size_t k = 0; k < a; ++k) t += A[k * rows + r] * w0[k];
            c0[r] = t;
        }
    }
}

void gemm_tn(std::size_t rows, std::size_t a, std::size_t b, const double* A, const double* B, double* G)
{
    const std::size_t body = rows - rows % 4;
    std::size_t k = 0;
    for (; k + 2 <= a; k += 2) {
        const double* x0 = A + (k + 0) * rows;
        const double* x1 = A + (k + 1) * rows;
        std::size_t j = 0;
        for (; j + 4 <= b; j += 4) {
            const double* y0 = B + (j + 0) * rows;
            const double* y1 = B + (j + 1) * rows;
            const double* y2 = B + (j + 2) * rows;
            const double* y3 = B + (j + 3) * rows;
            __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
            __m256d s02 = _mm256_setzero_pd(), s03 = _mm256_setzero_pd();
            __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
            __m256d s12 = _mm256_setzero_pd(), s13 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                const __m256d a0 = _mm256_loadu_pd(x0 + r);
                const __m256d a1 = _mm256_loadu_pd(x1 + r);
                __m256d y = _mm256_loadu_pd(y0 + r);
                s00 = _mm256_fmadd_pd(a0, y, s00);
                s10 = _mm256_fmadd_pd(a1, y, s10);
                y = _mm256_loadu_pd(y1 + r);
                s01 = _mm256_fmadd_pd(a0, y, s01);
                s11 = _mm256_fmadd_pd(a1, y, s11);
                y = _mm256_loadu_pd(y2 + r);
                s02 = _mm256_fmadd_pd(a0, y, s02);
                s12 = _mm256_fmadd_pd(a1, y, s12);
                y = _mm256_loadu_pd(y3 + r);
                s03 = _mm256_fmadd_pd(a0, y, s03);
                s13 = _mm256_fmadd_pd(a1, y, s13);
            }
            double t[8] = {hsum(s00), hsum(s01), hsum(s02), hsum(s03),
                           hsum(s10), hsum(s11), hsum(s12), hsum(s13)};
            for (std::size_t r = body; r < rows; ++r) {
                t[0] += x0[r] * y0[r];
                t[1] += x0[r] * y1[r];
                t[2] += x0[r] * y2[r];
                t[3] += x0[r] * y3[r];
                t[4] += x1[r] * y0[r];
                t[5] += x1[r] * y1[r];
                t[6] += x1[r] * y2[r];
                t[7] += x1[r] * y3[r];
            }
            for (std::size_t q = 0; q < 4; ++q) {
                G[(k + 0) + (j + q) * a] = t[q];
                G[(k + 1) + (j + q) * a] = t[4 + q];
            }
        }
        for (; j < b; ++j) {
            const double* y0 = B + j * rows;
            __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                const __m256d y = _mm256_loadu_pd(y0 + r);
                s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x0 + r), y, s0);
                s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x1 + r), y, s1);
            }
            double t0 = hsum(s0), t1 = hsum(s1);
            for (std::size_t r = body; r < rows; ++r) {
                t0 += x0[r] * y0[r];
                t1 += x1[r] * y0[r];
            }
            G[(k + 0) + j * a] = t0;
            G[(k + 1) + j * a] = t1;
        }
    }
    for (; k < a; ++k) {
        const double* x0 = A + k * rows;
        for (std::size_t j = 0; j < b; ++j) {
            const double* y0 = B + j * rows;
            __m256d s = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                s = _mm256_fmadd_pd(_mm256_loadu_pd(x0 + r), _mm256_loadu_pd(y0 + r), s);
            }
            double t = hsum(s);
            for (std::size_t r = body; r < rows; ++r) t += x0[r] * y0[r];
            G[k + j * a] = t;
        }
    }
}

void cgemm_nn(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* C, Complex* Out)
{
    const auto* P = reinterpret_cast<const double*>(Phi);
    auto* O = reinterpret_cast<double*>(Out);
    const std::size_t n2 = 2 * n;
    std::size_t j = 0;
    for (; j + 2 <= c; j += 2) {
        double* o0 = O + (j + 0) * n2;
        double* o1 = O + (j + 1) * n2;
        const Complex* c0 = C + (j + 0) * k;
        const Complex* c1 = C + (j + 1) * k;
        std::size_t r = 0;
        // Four complex rows (two registers) per step.
        for (; r + 8 <= n2; r += 8) {
            __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
            __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
            for (std::size_t m = 0; m < k; ++m) {
                const double* p = P + m * n2 + r;
                const __m256d p0 = _mm256_loadu_pd(p);
                const __m256d p1 = _mm256_loadu_pd(p + 4);
                const __m256d q0 = _mm256_permute_pd(p0, 0b0101);
                const __m256d q1 = _mm256_permute_pd(p1, 0b0101);

                const double a_re = c0[m].real(), a_im = c0[m].imag();
                __m256d br = _mm256_set1_pd(a_re);
                __m256d bi = _mm256_set_pd(a_im, -a_im, a_im, -a_im);
                s00 = _mm256_fmadd_pd(p0, br, s00);
                s00 = _mm256_fmadd_pd(q0, bi, s00);
                s01 = _mm256_fmadd_pd(p1, br, s01);
                s01 = _mm256_fmadd_pd(q1, bi, s01);

                const double b_re = c1[m].real(), b_im = c1[m].imag();
                br = _mm256_set1_pd(b_re);
                bi = _mm256_set_pd(b_im, -b_im, b_im, -b_im);
                s10 = _mm256_fmadd_pd(p0, br, s10);
                s10 = _mm256_fmadd_pd(q0, bi, s10);
                s11 = _mm256_fmadd_pd(p1, br, s11);
                s11 = _mm256_fmadd_pd(q1, bi, s11);
            }
            _mm256_storeu_pd(o0 + r, s00);
            _mm256_storeu_pd(o0 + r + 4, s01);
            _mm256_storeu_pd(o1 + r, s10);
            _mm256_storeu_pd(o1 + r + 4, s11);
        }
        for (; r < n2; r += 2) {
            double re0 = 0.0, im0 = 0.0, re1 = 0.0, im1 = 0.0;
            for (std::size_t m = 0; m < k; ++m) {
                const double pr = P[m * n2 + r];
                const double pi = P[m * n2 + r + 1];
                re0 += pr * c0[m].real() - pi * c0[m].imag();
                im0 += pi * c0[m].real() + pr * c0[m].imag();
                re1 += pr * c1[m].real() - pi * c1[m].imag();
                im1 += pi * c1[m].real() + pr * c1[m].imag();
            }
            o0[r] = re0;
            o0[r + 1] = im0;
            o1[r] = re1;
            o1[r + 1] = im1;
        }
    }
    for (; j < c; ++j) {
        double* o0 = O + j * n2;
        const Complex* c0 = C + j * k;
        std::size_t r = 0;
        for (; r + 4 <= n2; r += 4) {
            __m256d s = _mm256_setzero_pd();
            for (std::size_t m = 0; m < k; ++m) {
                const __m256d p = _mm256_loadu_pd(P + m * n2 + r);
                const __m256d q = _mm256_permute_pd(p, 0b0101);
                const double a_re = c0[m].real(), a_im = c0[m].imag();
                s = _mm256_fmadd_pd(p, _mm256_set1_pd(a_re), s);
                s = _mm256_fmadd_pd(q, _mm256_set_pd(a_im, -a_im, a_im, -a_im), s);
            }
            _mm256_storeu_pd(o0 + r, s);
        }
        for (; r < n2; r += 2) {
            double re = 0.0, im = 0.0;
            for (std::size_t m = 0; m < k; ++m) {
                const double pr = P[m * n2 + r];
                const double pi = P[m * n2 + r + 1];
                re += pr * c0[m].real() - pi * c0[m].imag();
                im += pi * c0[m].real() + pr * c0[m].imag();
            }
            o0[r] = re;
            o0[r + 1] = im;
        }
    }
}

void cgemm_cn(std::size_t n, std::size_t k, std::size_t c, const Complex* Phi, const Complex* X, Complex* Out)
{
    const auto* P = reinterpret_cast<const double*>(Phi);
    const auto* Xd = reinterpret_cast<const double*>(X);
    const std::size_t n2 = 2 * n;
    const std::size_t body = n2 - n2 % 4;

    auto tail = [&](const double* p, const double* x, double& re, double& im) {
        for (std::size_t r = body; r < n2; r += 2) {
            re += p[r] * x[r] + p[r + 1] * x[r + 1];
            im += p[r] * x[r + 1] - p[r + 1] * x[r];
        }
    };

    std::size_t m = 0;
    for (; m + 2 <= k; m += 2) {
        const double* p0 = P + (m + 0) * n2;
        const double* p1 = P + (m + 1) * n2;
        std::size_t j = 0;
        for (; j + 2 <= c; j += 2) {
            const double* x0 = Xd + (j + 0) * n2;
            const double* x1 = Xd + (j + 1) * n2;
            __m256d r00 = _mm256_setzero_pd(), i00 = _mm256_setzero_pd();
            __m256d r01 = _mm256_setzero_pd(), i01 = _mm256_setzero_pd();
            __m256d r10 = _mm256_setzero_pd(), i10 = _mm256_setzero_pd();
            __m256d r11 = _mm256_setzero_pd(), i11 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                const __m256d a0 = _mm256_loadu_pd(p0 + r);
                const __m256d a1 = _mm256_loadu_pd(p1 + r);
                const __m256d y0 = _mm256_loadu_pd(x0 + r);
                const __m256d y1 = _mm256_loadu_pd(x1 + r);
                const __m256d z0 = _mm256_permute_pd(y0, 0b0101);
                const __m256d z1 = _mm256_permute_pd(y1, 0b0101);
                r00 = _mm256_fmadd_pd(a0, y0, r00);
                i00 = _mm256_fmadd_pd(a0, z0, i00);
                r01 = _mm256_fmadd_pd(a0, y1, r01);
                i01 = _mm256_fmadd_pd(a0, z1, i01);
                r10 = _mm256_fmadd_pd(a1, y0, r10);
                i10 = _mm256_fmadd_pd(a1, z0, i10);
                r11 = _mm256_fmadd_pd(a1, y1, r11);
                i11 = _mm256_fmadd_pd(a1, z1, i11);
            }
            double re00 = hsum(r00), im00 = hsub_alternating(i00);
            double re01 = hsum(r01), im01 = hsub_alternating(i01);
            double re10 = hsum(r10), im10 = hsub_alternating(i10);
            double re11 = hsum(r11), im11 = hsub_alternating(i11);
            tail(p0, x0, re00, im00);
            tail(p0, x1, re01, im01);
            tail(p1, x0, re10, im10);
            tail(p1, x1, re11, im11);
            Out[(m + 0) + (j + 0) * k] = Complex(re00, im00);
            Out[(m + 0) + (j + 1) * k] = Complex(re01, im01);
            Out[(m + 1) + (j + 0) * k] = Complex(re10, im10);
            Out[(m + 1) + (j + 1) * k] = Complex(re11, im11);
        }
        for (; j < c; ++j) {
            const double* x0 = Xd + j * n2;
            __m256d r0 = _mm256_setzero_pd(), i0 = _mm256_setzero_pd();
            __m256d r1 = _mm256_setzero_pd(), i1 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                const __m256d y = _mm256_loadu_pd(x0 + r);
                const __m256d z = _mm256_permute_pd(y, 0b0101);
                const __m256d a0 = _mm256_loadu_pd(p0 + r);
                const __m256d a1 = _mm256_loadu_pd(p1 + r);
                r0 = _mm256_fmadd_pd(a0, y, r0);
                i0 = _mm256_fmadd_pd(a0, z, i0);
                r1 = _mm256_fmadd_pd(a1, y, r1);
                i1 = _mm256_fmadd_pd(a1, z, i1);
            }
            double re0 = hsum(r0), im0 = hsub_alternating(i0);
            double re1 = hsum(r1), im1 = hsub_alternating(i1);
            tail(p0, x0, re0, im0);
            tail(p1, x0, re1, im1);
            Out[(m + 0) + j * k] = Complex(re0, im0);
            Out[(m + 1) + j * k] = Complex(re1, im1);
        }
    }
    for (; m < k; ++m) {
        const double* p0 = P + m * n2;
        for (std::size_t j = 0; j < c; ++j) {
            const double* x0 = Xd + j * n2;
            __m256d r0 = _mm256_setzero_pd(), i0 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < body; r += 4) {
                const __m256d y = _mm256_loadu_pd(x0 + r);
                const __m256d a0 = _mm256_loadu_pd(p0 + r);
                r0 = _mm256_fmadd_pd(a0, y, r0);
                i0 = _mm256_fmadd_pd(a0, _mm256_permute_pd(y, 0b0101), i0);
            }
            double re = hsum(r0), im = hsub_alternating(i0);
            tail(p0, x0, re, im);
            Out[m + j * k] = Complex(re, im);
        }
    }
}

/// Squared magnitude of each complex pair, duplicated into both lanes.
inline __m256d pair_norm2(__m256d z)
{
    const __m256d sq = _mm256_mul_pd(z, z);
    return _mm256_add_pd(sq, _mm256_permute_pd(sq, 0b0101));
}

inline __m256d pair_dot(__m256d a, __m256d b)
{
    const __m256d p = _mm256_mul_pd(a, b);
    return _mm256_add_pd(p, _mm256_permute_pd(p, 0b0101));
}

void magnitude_relu(std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard, Complex* X)
{
    const __m256d zero = _mm256_setzero_pd();
    const __m256d vguard = _mm256_set1_pd(guard);
    for (std::size_t j = 0; j < cols; ++j) {
        const double b = bias[j];
        const __m256d vb = _mm256_set1_pd(b);
        const auto* z = reinterpret_cast<const double*>(Z + j * rows);
        auto* x = reinterpret_cast<double*>(X + j * rows);
        std::size_t r = 0;
        for (; r + 2 <= rows; r += 2) {
            const __m256d v = _mm256_loadu_pd(z + 2 * r);
            const __m256d mag = _mm256_sqrt_pd(pair_norm2(v));
            const __m256d num = _mm256_max_pd(_mm256_sub_pd(mag, vb), zero);
            const __m256d live = _mm256_cmp_pd(mag, vguard, _CMP_GT_OQ);
            // Lanes failing the guard divide by a tiny or zero magnitude; they are masked below.
            const __m256d f = _mm256_and_pd(_mm256_div_pd(num, _mm256_max_pd(mag, vguard)), live);
            _mm256_storeu_pd(x + 2 * r, _mm256_mul_pd(v, f));
        }
        for (; r < rows; ++r) {
            const double zr = z[2 * r], zi = z[2 * r + 1];
            const double mag = std::sqrt(zr * zr + zi * zi);
            double f = 0.0;
            if (mag > guard) f = std::max(mag - b, 0.0) / mag;
            x[2 * r] = zr * f;
            x[2 * r + 1] = zi * f;
        }
    }
}

void magnitude_relu_backward(
    std::size_t rows, std::size_t cols, const Complex* Z, const double* bias, double guard,
    const Complex* dX, Complex* dZ, double* dbias)
{
    const __m256d vguard = _mm256_set1_pd(guard);
    for (std::size_t j = 0; j < cols; ++j) {
        const double b = bias[j];
        const __m256d vb = _mm256_set1_pd(b);
        const auto* z = reinterpret_cast<const double*>(Z + j * rows);
        const auto* g = reinterpret_cast<const double*>(dX + j * rows);
        auto* out = reinterpret_cast<double*>(dZ + j * rows);
        __m256d dbacc = _mm256_setzero_pd();
        std::size_t r = 0;
        for (; r + 2 <= rows; r += 2) {
            const __m256d v = _mm256_loadu_pd(z + 2 * r);
            const __m256d d = _mm256_loadu_pd(g + 2 * r);
            const __m256d mag = _mm256_sqrt_pd(pair_norm2(v));
            const __m256d live = _mm256_and_pd(
                _mm256_cmp_pd(mag, vguard, _CMP_GT_OQ), _mm256_cmp_pd(mag, vb, _CMP_GT_OQ));
            const __m256d safe = _mm256_max_pd(mag, vguard);
            const __m256d u = _mm256_div_pd(v, safe);
            const __m256d proj = pair_dot(u, d);
            const __m256d s = _mm256_div_pd(vb, safe);
            const __m256d tangential = _mm256_sub_pd(d, _mm256_mul_pd(u, proj));
            const __m256d grad = _mm256_sub_pd(d, _mm256_mul_pd(s, tangential));
            _mm256_storeu_pd(out + 2 * r, _mm256_and_pd(grad, live));
            dbacc = _mm256_add_pd(dbacc, _mm256_and_pd(proj, live));
        }
        // proj is duplicated in both lanes of each pair.
        double db = -0.5 * hsum(dbacc);
        for (; r < rows; ++r) {
            const double zr = z[2 * r], zi = z[2 * r + 1];
            const double mag = std::sqrt(zr * zr + zi * zi);
            if (!(mag > guard) || !(mag > b)) {
                out[2 * r] = 0.0;
                out[2 * r + 1] = 0.0;
                continue;
            }
            const double ux = zr / mag, uy = zi / mag;
            const double gx = g[2 * r], gy = g[2 * r + 1];
            const double proj = ux * gx + uy * gy;
            const double s = b / mag;
            out[2 * r] = gx - s * (gx - ux * proj);
            out[2 * r + 1] = gy - s * (gy - uy * proj);
            db -= proj;
        }
        dbias[j] += db;
    }
}

} // namespace

const KernelTable& avx2_kernels()
{
    static const KernelTable table{
        &gemm_nn, &gemm_tn, &cgemm_nn, &cgemm_cn, &magnitude_relu, &magnitude_relu_backward};
    return table;
}

} // namespace vhn::simd::detail
