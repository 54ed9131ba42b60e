#pragma once

#include <vhn/binary_io.hpp>
#include <vhn/operators.hpp>
#include <vhn/tolerances.hpp>

#include <cstdint>
#include <filesystem>

namespace vhn {

///
/// The k lowest eigenpairs of L phi = lambda M phi, M-orthonormal, eigenvalues
/// ascending. The largest-magnitude entry of every eigenvector is real and
/// positive (ties go to the lowest index).
///
template <class Scalar>
struct EigenBasis
{
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> phi;
    Eigen::VectorXd lambda;

    Index size() const { return static_cast<Index>(lambda.size()); }
    Index num_vertices() const { return static_cast<Index>(phi.rows()); }
};

using SpectralBasis = EigenBasis<Complex>;
using ScalarBasis = EigenBasis<double>;

struct EigenOptions
{
    /// Problems up to this size use the dense solver; larger ones use
    /// shift-invert block Lanczos.
    Index dense_limit = 1000;
    int block_size = 8;
    /// Krylov dimension grows until every Ritz pair passes the residual check
    /// or this many restarts have happened.
    int max_iterations = 12;
    std::uint64_t seed = 0x5eed;
    Tolerances tol = default_tolerances();
};

/// Throws ValidationError when k < 1 or k > n, NumericalError when residuals
/// stay above the bound or an eigenvalue is negative beyond tolerance.
SpectralBasis solve_eigenbasis(const SparseMatrixC& L, const MassMatrix& M, Index k, const EigenOptions& options = {});
ScalarBasis solve_eigenbasis(const SparseMatrixR& L, const MassMatrix& M, Index k, const EigenOptions& options = {});

/// Per-column relative residuals |L x - lambda M x|_{M^-1} / |x|_M.
Eigen::VectorXd eigen_residuals(const SparseMatrixC& L, const MassMatrix& M, const SpectralBasis& basis);
Eigen::VectorXd eigen_residuals(const SparseMatrixR& L, const MassMatrix& M, const ScalarBasis& basis);

/// u' = Phi diag(exp(-lambda s)) Phi^H M u, one shared time.
MatrixXc spectral_diffuse(const SpectralBasis& basis, const MassMatrix& M, const MatrixXc& u, double s);
/// Column j diffused for time s[j].
MatrixXc spectral_diffuse(const SpectralBasis& basis, const MassMatrix& M, const MatrixXc& u, const Eigen::VectorXd& s);

/// One implicit Euler step: solves (M + s L) u' = M u.
MatrixXc direct_diffuse(const SparseMatrixC& L, const MassMatrix& M, const MatrixXc& u, double s);
Eigen::MatrixXd direct_diffuse(const SparseMatrixR& L, const MassMatrix& M, const Eigen::MatrixXd& u, double s);

/// Payload encoding shared by caches: dimensions, eigenvalues, then
/// eigenvectors row-major (complex entries as (re, im) pairs).
void write_basis(PayloadWriter& out, const SpectralBasis& basis);
void write_basis(PayloadWriter& out, const ScalarBasis& basis);
SpectralBasis read_spectral_basis(PayloadReader& in);
ScalarBasis read_scalar_basis(PayloadReader& in);

/// Standalone basis file. Payload: dimensions, eigenvalues, then eigenvectors row-major as
/// (re, im) pairs. `tag` (typically a content hash) is stored in the header
/// and checked on load.
void save_basis(const SpectralBasis& basis, const std::string& tag, const std::filesystem::path& path);
SpectralBasis load_basis(const std::filesystem::path& path, const std::string& expected_tag);

} // namespace vhn
