#include "oracles.hpp"

#include <vhn/error.hpp>
#include <vhn/simd/kernels.hpp>

#include <doctest.h>

#include <random>
#include <vector>

using namespace vhn;
using vhn::simd::Isa;

namespace {

std::vector<Isa> available()
{
    std::vector<Isa> out{Isa::scalar};
    if (simd::is_supported(Isa::avx2)) out.push_back(Isa::avx2);
    return out;
}

Eigen::MatrixXd random_real(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    return oracle::random_complex(r, c, seed).real();
}

double rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

// Reference magnitude nonlinearity written from its definition.
Complex mrelu(Complex z, double b)
{
    const double r = std::abs(z);
    if (r <= 1e-20) return 0.0;
    return std::max(r - b, 0.0) * z / r;
}

const int shapes_[][3] = {{1, 1, 1}, {3, 5, 2}, {7, 9, 13}, {16, 8, 4}, {33, 17, 5}, {100, 31, 9}, {129, 64, 64}};

} // namespace

TEST_CASE("active variant is supported")
{
    CHECK(simd::is_supported(simd::active_isa()));
    CHECK(simd::is_supported(Isa::scalar));
    CHECK(simd::to_string(Isa::avx2) == "avx2");
}

TEST_CASE("real-weight products match Eigen")
{
    std::uint64_t seed = 1;
    for (Isa isa : available()) {
        for (const auto& s : shapes_) {
            const Eigen::MatrixXcd Y = oracle::random_complex(s[0], s[1], ++seed);
            const Eigen::MatrixXd W = random_real(s[1], s[2], ++seed);
            const Eigen::MatrixXcd dZ = oracle::random_complex(s[0], s[2], ++seed);
            CHECK(rel(simd::apply_real_weights(Y, W, isa), Y * W.cast<Complex>()) < 1e-14);
            CHECK(rel(simd::apply_real_weights_transposed(dZ, W, isa), dZ * W.transpose().cast<Complex>()) < 1e-14);
            const Eigen::MatrixXd G = (Y.adjoint() * dZ).real();
            CHECK((simd::real_weight_gradient(Y, dZ, isa) - G).norm() < 1e-13 * G.norm());
        }
    }
}

TEST_CASE("complex projections match Eigen")
{
    std::uint64_t seed = 100;
    for (Isa isa : available()) {
        for (const auto& s : shapes_) {
            const Eigen::MatrixXcd Phi = oracle::random_complex(s[0], s[1], ++seed);
            const Eigen::MatrixXcd X = oracle::random_complex(s[0], s[2], ++seed);
            const Eigen::MatrixXcd C = oracle::random_complex(s[1], s[2], ++seed);
            CHECK(rel(simd::project(Phi, X, isa), Phi.adjoint() * X) < 1e-14);
            CHECK(rel(simd::expand(Phi, C, isa), Phi * C) < 1e-14);
        }
    }
}

TEST_CASE("magnitude nonlinearity forward and backward")
{
    std::uint64_t seed = 200;
    for (Isa isa : available()) {
        for (const auto& s : shapes_) {
            Eigen::MatrixXcd Z = oracle::random_complex(s[0], s[2], ++seed);
            Z(0, 0) = 0.0; // exercises the guard
            Eigen::VectorXd b = random_real(s[2], 1, ++seed).col(0).cwiseAbs() * 0.8;
            const Eigen::MatrixXcd X = simd::magnitude_relu(Z, b, 1e-20, isa);
            for (Eigen::Index j = 0; j < Z.cols(); ++j)
                for (Eigen::Index i = 0; i < Z.rows(); ++i) CHECK(std::abs(X(i, j) - mrelu(Z(i, j), b[j])) < 1e-15);

            const Eigen::MatrixXcd dX = oracle::random_complex(s[0], s[2], ++seed);
            Eigen::MatrixXcd dZ;
            Eigen::VectorXd db = Eigen::VectorXd::Zero(b.size());
            simd::magnitude_relu_backward(Z, b, 1e-20, dX, dZ, db, isa);
            // finite differences of L = Re sum conj(dX) X
            const double h = 1e-6;
            auto loss = [&](const Eigen::MatrixXcd& z, const Eigen::VectorXd& bb) {
                return (dX.adjoint() * simd::magnitude_relu(z, bb, 1e-20, Isa::scalar)).trace().real();
            };
            for (Eigen::Index j = 0; j < std::min<Eigen::Index>(Z.cols(), 3); ++j) {
                for (Eigen::Index i = 1; i < std::min<Eigen::Index>(Z.rows(), 4); ++i) {
                    if (std::abs(std::abs(Z(i, j)) - b[j]) < 1e-3) continue;
                    Eigen::MatrixXcd zp = Z, zm = Z;
                    zp(i, j) += h;
                    zm(i, j) -= h;
                    const double gre = (loss(zp, b) - loss(zm, b)) / (2 * h);
                    zp = Z;
                    zm = Z;
                    zp(i, j) += Complex(0, h);
                    zm(i, j) -= Complex(0, h);
                    const double gim = (loss(zp, b) - loss(zm, b)) / (2 * h);
                    CHECK(std::abs(dZ(i, j) - Complex(gre, gim)) < 1e-7);
                }
                Eigen::VectorXd bp = b, bm = b;
                bp[j] += h;
                bm[j] -= h;
                CHECK(std::abs(db[j] - (loss(Z, bp) - loss(Z, bm)) / (2 * h)) < 1e-6 * (1.0 + std::abs(db[j])));
            }
        }
    }
}

TEST_CASE("variants agree with each other")
{
    if (!simd::is_supported(Isa::avx2)) return;
    const Eigen::MatrixXcd Y = oracle::random_complex(257, 48, 5);
    const Eigen::MatrixXd W = random_real(48, 37, 6);
    CHECK(rel(simd::apply_real_weights(Y, W, Isa::avx2), simd::apply_real_weights(Y, W, Isa::scalar)) < 1e-14);
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(48, 0.5);
    CHECK(rel(simd::magnitude_relu(Y, b, 1e-20, Isa::avx2), simd::magnitude_relu(Y, b, 1e-20, Isa::scalar)) < 1e-15);
    const Eigen::MatrixXcd dX = oracle::random_complex(257, 48, 7);
    Eigen::MatrixXcd d1, d2;
    Eigen::VectorXd g1 = Eigen::VectorXd::Zero(48), g2 = Eigen::VectorXd::Zero(48);
    simd::magnitude_relu_backward(Y, b, 1e-20, dX, d1, g1, Isa::avx2);
    simd::magnitude_relu_backward(Y, b, 1e-20, dX, d2, g2, Isa::scalar);
    CHECK(rel(d1, d2) < 1e-14);
    CHECK((g1 - g2).norm() < 1e-12 * g2.norm());
}

TEST_CASE("selecting a variant")
{
    const Isa before = simd::active_isa();
    simd::set_active_isa(Isa::scalar);
    CHECK(simd::active_isa() == Isa::scalar);
    if (!simd::is_supported(Isa::avx2)) CHECK_THROWS_AS(simd::set_active_isa(Isa::avx2), ValidationError);
    simd::set_active_isa(before);
}

TEST_CASE("shape mismatches are rejected")
{
    const Eigen::MatrixXcd Y = oracle::random_complex(4, 3, 1);
    CHECK_THROWS_AS(simd::apply_real_weights(Y, Eigen::MatrixXd::Zero(2, 2)), ValidationError);
    CHECK_THROWS_AS(simd::project(Y, oracle::random_complex(5, 2, 2)), ValidationError);
    CHECK_THROWS_AS(simd::magnitude_relu(Y, Eigen::VectorXd::Zero(2), 1e-20), ValidationError);
}
