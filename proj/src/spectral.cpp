#include <vhn/error.hpp>
#include <vhn/simd/kernels.hpp>
#include <vhn/spectral.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <spdlog/spdlog.h>

#include <cmath>
#include <random>
#include <type_traits>

namespace vhn {

namespace {

template <class S>
using Dense = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Sparse = Eigen::SparseMatrix<S, Eigen::RowMajor>;
template <class S>
using SparseCol = Eigen::SparseMatrix<S, Eigen::ColMajor>;

template <class S>
S random_entry(std::mt19937_64& rng, std::normal_distribution<double>& dist)
{
    if constexpr (std::is_same_v<S, double>) {
        return dist(rng);
    } else {
        const double re = dist(rng);
        const double im = dist(rng);
        return S(re, im);
    }
}

template <class S>
void check_problem(const Sparse<S>& L, const MassMatrix& M, Index k)
{
    const Index n = static_cast<Index>(L.rows());
    if (L.cols() != n || M.size() != n) {
        throw ValidationError("eigenproblem: operator is " + std::to_string(L.rows()) + "x" +
                              std::to_string(L.cols()) + ", mass matrix has " + std::to_string(M.size()) + " entries");
    }
    if (k < 1 || k > n) {
        throw ValidationError("eigenproblem: requested k = " + std::to_string(k) + " modes but n = " + std::to_string(n));
    }
    if ((M.areas.array() <= 0.0).any()) throw ValidationError("eigenproblem: mass matrix is not positive");
}

template <class S>
EigenBasis<S> dense_solve(const Sparse<S>& L, const MassMatrix& M, Index k)
{
    const Eigen::VectorXd d = M.areas.cwiseSqrt().cwiseInverse();
    Dense<S> A = Dense<S>(L);
    A = d.asDiagonal() * A * d.asDiagonal();
    Dense<S> Ah = A.adjoint();
    A = (A + Ah) * 0.5;
    Eigen::SelfAdjointEigenSolver<Dense<S>> es(A);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver did not converge");
    EigenBasis<S> out;
    out.lambda = es.eigenvalues().head(k);
    out.phi = d.asDiagonal() * es.eigenvectors().leftCols(k);
    return out;
}

template <class S>
S m_dot(const MassMatrix& M, const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& a,
        const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& b)
{
    return (a.array().conjugate() * M.areas.array().template cast<S>() * b.array()).sum();
}

/// M-orthonormalize the columns of W against Q[:, 0..used) and each other.
/// Columns that collapse are replaced by fresh random vectors.
template <class S>
void orthonormalize_block(const MassMatrix& M, const Dense<S>& Q, Index used, Dense<S>& W,
                          std::mt19937_64& rng, std::normal_distribution<double>& dist)
{
    const Index n = static_cast<Index>(W.rows());
    const Eigen::Matrix<S, Eigen::Dynamic, 1> m = M.areas.template cast<S>();
    for (Index j = 0; j < W.cols(); ++j) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = std::sqrt(std::real(m_dot<S>(M, W.col(j), W.col(j))));
            for (int pass = 0; pass < 2; ++pass) {
                if (used > 0) {
                    const auto Qu = Q.leftCols(used);
                    const Eigen::Matrix<S, Eigen::Dynamic, 1> c = Qu.adjoint() * m.cwiseProduct(W.col(j));
                    W.col(j) -= Qu * c;
                }
                for (Index i = 0; i < j; ++i) W.col(j) -= m_dot<S>(M, W.col(i), W.col(j)) * W.col(i);
            }
            const double after = std::sqrt(std::real(m_dot<S>(M, W.col(j), W.col(j))));
            if (after > 1e-10 * before && after > 0.0) {
                W.col(j) /= after;
                break;
            }
            for (Index r = 0; r < n; ++r) W(r, j) = random_entry<S>(rng, dist);
            if (attempt == 3) throw NumericalError("block Lanczos: cannot extend the Krylov basis");
        }
    }
}

template <class S>
EigenBasis<S> lanczos_solve(const Sparse<S>& L, const MassMatrix& M, Index k, const EigenOptions& opt)
{
    const Index n = static_cast<Index>(L.rows());
    const Index b = std::max(1, std::min<Index>(opt.block_size, n));

    double mu = 0.0;
    for (Index i = 0; i < n; ++i) mu += std::real(L.coeff(i, i)) / M.areas[i];
    mu /= n;
    const double sigma = 1e-4 * mu;

    SparseCol<S> K = SparseCol<S>(L);
    for (Index i = 0; i < n; ++i) K.coeffRef(i, i) += sigma * M.areas[i];
    Eigen::SimplicialLDLT<SparseCol<S>> solver(K);
    if (solver.info() != Eigen::Success) throw NumericalError("block Lanczos: shifted factorization failed");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> dist(0.0, 1.0);

    Index target = std::min<Index>(n, std::max<Index>(2 * k, k + 4 * b) + b);
    Dense<S> Q(n, std::min<Index>(n, target + b));
    Index used = 0;

    Dense<S> W(n, b);
    for (Index j = 0; j < b; ++j)
        for (Index r = 0; r < n; ++r) W(r, j) = random_entry<S>(rng, dist);
    orthonormalize_block<S>(M, Q, used, W, rng, dist);

    Eigen::VectorXd residual;
    for (int iteration = 0;; ++iteration) {
        while (used < target) {
            const Index take = std::min<Index>(W.cols(), target - used);
            Q.middleCols(used, take) = W.leftCols(take);
            const Index start = used;
            used += take;
            if (used >= target) break;
            Dense<S> rhs = M.areas.template cast<S>().asDiagonal() * Q.middleCols(start, take);
            W = solver.solve(rhs);
            if (solver.info() != Eigen::Success) throw NumericalError("block Lanczos: shifted solve failed");
            W.conservativeResize(Eigen::NoChange, std::min<Index>(W.cols(), n - used));
            orthonormalize_block<S>(M, Q, used, W, rng, dist);
        }

        const auto Qu = Q.leftCols(used);
        Dense<S> H = Qu.adjoint() * (L * Qu);
        Dense<S> Hh = H.adjoint();
        H = (H + Hh) * 0.5;
        Eigen::SelfAdjointEigenSolver<Dense<S>> es(H);
        if (es.info() != Eigen::Success) throw NumericalError("block Lanczos: Rayleigh-Ritz step failed");

        EigenBasis<S> out;
        out.lambda = es.eigenvalues().head(k);
        out.phi = Qu * es.eigenvectors().leftCols(k);

        const double scale = std::max(std::abs(out.lambda[k - 1]), 1e-300);
        const Dense<S> R = L * out.phi - M.areas.template cast<S>().asDiagonal() * out.phi * out.lambda.template cast<S>().asDiagonal();
        residual.resize(k);
        for (Index j = 0; j < k; ++j) {
            residual[j] = std::sqrt((R.col(j).cwiseAbs2().array() / M.areas.array()).sum());
        }
        const double worst = residual.maxCoeff() / scale;
        spdlog::debug("block Lanczos: n={} k={} dim={} worst relative residual {:.3e}", n, k, used, worst);
        if (worst <= opt.tol.eigen_residual || used == n) return out;
        if (iteration + 1 >= opt.max_iterations) {
            throw NumericalError("block Lanczos did not converge: worst relative residual " + std::to_string(worst) +
                                 " after Krylov dimension " + std::to_string(used));
        }
        // Grow the subspace and keep iterating from the last block.
        target = std::min<Index>(n, used + std::max<Index>(k / 2, 2 * b));
        Q.conservativeResize(Eigen::NoChange, std::min<Index>(n, target + b));
        Dense<S> rhs = M.areas.template cast<S>().asDiagonal() * Q.middleCols(used - std::min(used, b), std::min(used, b));
        W = solver.solve(rhs);
        W.conservativeResize(Eigen::NoChange, std::min<Index>(W.cols(), n - used));
        orthonormalize_block<S>(M, Q, used, W, rng, dist);
    }
}

template <class S>
Eigen::VectorXd residuals(const Sparse<S>& L, const MassMatrix& M, const EigenBasis<S>& basis)
{
    const Dense<S> R = L * basis.phi -
                       M.areas.template cast<S>().asDiagonal() * basis.phi * basis.lambda.template cast<S>().asDiagonal();
    Eigen::VectorXd out(basis.size());
    for (Index j = 0; j < basis.size(); ++j) {
        const double rn = std::sqrt((R.col(j).cwiseAbs2().array() / M.areas.array()).sum());
        const double xn = std::sqrt((basis.phi.col(j).cwiseAbs2().array() * M.areas.array()).sum());
        out[j] = rn / xn;
    }
    return out;
}

template <class S>
void finalize(const Sparse<S>& L, const MassMatrix& M, EigenBasis<S>& basis, const Tolerances& tol)
{
    const Index k = basis.size();
    const double lambda_k = std::abs(basis.lambda[k - 1]);

    const Eigen::VectorXd res = residuals(L, M, basis);
    for (Index j = 0; j < k; ++j) {
        if (!(res[j] <= tol.eigen_residual * std::max(lambda_k, 1e-300))) {
            throw NumericalError("eigenpair " + std::to_string(j) + " has relative residual " + std::to_string(res[j]) +
                                 " (bound " + std::to_string(tol.eigen_residual * lambda_k) + ")");
        }
    }
    for (Index j = 0; j < k; ++j) {
        if (basis.lambda[j] < -tol.negative_eigenvalue * lambda_k) {
            throw NumericalError("eigenvalue " + std::to_string(j) + " = " + std::to_string(basis.lambda[j]) +
                                 " is negative beyond tolerance");
        }
        basis.lambda[j] = std::max(basis.lambda[j], 0.0);
    }
    for (Index j = 0; j < k; ++j) {
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < basis.phi.rows(); ++i) {
            const double a = std::abs(basis.phi(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        const S pivot = basis.phi(arg, j);
        if constexpr (std::is_same_v<S, double>) {
            if (pivot < 0.0) basis.phi.col(j) *= -1.0;
        } else {
            basis.phi.col(j) *= std::conj(pivot) / std::abs(pivot);
            basis.phi(arg, j) = S(std::abs(basis.phi(arg, j)), 0.0);
        }
    }
}

template <class S>
EigenBasis<S> solve(const Sparse<S>& L, const MassMatrix& M, Index k, const EigenOptions& opt)
{
    check_problem(L, M, k);
    EigenBasis<S> basis = L.rows() <= opt.dense_limit ? dense_solve(L, M, k) : lanczos_solve(L, M, k, opt);
    finalize(L, M, basis, opt.tol);
    return basis;
}

void check_time(double s)
{
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("diffusion time must be finite and non-negative, got " + std::to_string(s));
}

void check_field(Index n, Eigen::Index rows, const char* what)
{
    if (rows != n) {
        throw ValidationError(std::string(what) + ": field has " + std::to_string(rows) + " rows, operator has " +
                              std::to_string(n));
    }
}

template <class S>
Dense<S> implicit_step(const Sparse<S>& L, const MassMatrix& M, const Dense<S>& u, double s)
{
    check_time(s);
    check_field(static_cast<Index>(L.rows()), u.rows(), "direct_diffuse");
    SparseCol<S> A = SparseCol<S>(L) * S(s);
    for (Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += M.areas[i];
    Eigen::SimplicialLDLT<SparseCol<S>> solver(A);
    if (solver.info() != Eigen::Success) throw NumericalError("direct_diffuse: factorization of M + sL failed");
    Dense<S> out = solver.solve(M.areas.template cast<S>().asDiagonal() * u);
    if (solver.info() != Eigen::Success) throw NumericalError("direct_diffuse: solve failed");
    return out;
}

template <class S>
void write_basis_impl(PayloadWriter& out, const EigenBasis<S>& basis)
{
    out.put(static_cast<std::int64_t>(basis.phi.rows()));
    out.put(static_cast<std::int64_t>(basis.phi.cols()));
    out.put(std::span<const double>(basis.lambda.data(), static_cast<std::size_t>(basis.lambda.size())));
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = basis.phi;
    out.put(std::span<const S>(rows.data(), static_cast<std::size_t>(rows.size())));
}

template <class S>
EigenBasis<S> read_basis_impl(PayloadReader& in)
{
    const auto n = in.get_i64();
    const auto k = in.get_i64();
    if (n < 1 || k < 1 || k > n) throw ValidationError("basis payload has invalid dimensions");
    EigenBasis<S> basis;
    basis.lambda.resize(k);
    in.get(std::span<double>(basis.lambda.data(), static_cast<std::size_t>(k)));
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(n, k);
    in.get(std::span<S>(rows.data(), static_cast<std::size_t>(rows.size())));
    basis.phi = rows;
    return basis;
}

constexpr std::string_view basis_magic = "VHNBASIS";
constexpr std::uint32_t basis_version = 1;

} // namespace

SpectralBasis solve_eigenbasis(const SparseMatrixC& L, const MassMatrix& M, Index k, const EigenOptions& options)
{
    return solve<Complex>(L, M, k, options);
}

ScalarBasis solve_eigenbasis(const SparseMatrixR& L, const MassMatrix& M, Index k, const EigenOptions& options)
{
    return solve<double>(L, M, k, options);
}

Eigen::VectorXd eigen_residuals(const SparseMatrixC& L, const MassMatrix& M, const SpectralBasis& basis)
{
    return residuals<Complex>(L, M, basis);
}

Eigen::VectorXd eigen_residuals(const SparseMatrixR& L, const MassMatrix& M, const ScalarBasis& basis)
{
    return residuals<double>(L, M, basis);
}

MatrixXc spectral_diffuse(const SpectralBasis& basis, const MassMatrix& M, const MatrixXc& u, double s)
{
    return spectral_diffuse(basis, M, u, Eigen::VectorXd::Constant(u.cols(), s));
}

MatrixXc spectral_diffuse(const SpectralBasis& basis, const MassMatrix& M, const MatrixXc& u, const Eigen::VectorXd& s)
{
    check_field(basis.num_vertices(), u.rows(), "spectral_diffuse");
    if (s.size() != u.cols()) throw ValidationError("spectral_diffuse: one time per channel required");
    for (Eigen::Index j = 0; j < s.size(); ++j) check_time(s[j]);
    const MatrixXc Mu = M.areas.asDiagonal() * u;
    MatrixXc C = simd::project(basis.phi, Mu);
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
        C.col(j).array() *= (-basis.lambda.array() * s[j]).exp();
    }
    return simd::expand(basis.phi, C);
}

MatrixXc direct_diffuse(const SparseMatrixC& L, const MassMatrix& M, const MatrixXc& u, double s)
{
    return implicit_step<Complex>(L, M, u, s);
}

Eigen::MatrixXd direct_diffuse(const SparseMatrixR& L, const MassMatrix& M, const Eigen::MatrixXd& u, double s)
{
    return implicit_step<double>(L, M, u, s);
}

void write_basis(PayloadWriter& out, const SpectralBasis& basis) { write_basis_impl(out, basis); }
void write_basis(PayloadWriter& out, const ScalarBasis& basis) { write_basis_impl(out, basis); }
SpectralBasis read_spectral_basis(PayloadReader& in) { return read_basis_impl<Complex>(in); }
ScalarBasis read_scalar_basis(PayloadReader& in) { return read_basis_impl<double>(in); }

void save_basis(const SpectralBasis& basis, const std::string& tag, const std::filesystem::path& path)
{
    PayloadWriter w;
    write_basis(w, basis);
    write_container(path, basis_magic, Container{basis_version, tag, w.bytes()});
}

SpectralBasis load_basis(const std::filesystem::path& path, const std::string& expected_tag)
{
    const Container c = read_container(path, basis_magic, basis_version);
    if (c.header != expected_tag) {
        throw ValidationError("'" + path.string() + "' belongs to a different mesh (tag mismatch)");
    }
    PayloadReader r(c.payload);
    SpectralBasis basis = read_spectral_basis(r);
    if (!r.at_end()) throw ValidationError("'" + path.string() + "' has trailing data");
    return basis;
}

} // namespace vhn
