#pragma once

#include <vhn/frame.hpp>
#include <vhn/mesh.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <complex>
#include <filesystem>

namespace vhn {

using SparseMatrixC = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using SparseMatrixR = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

///
/// Discrete connection Laplacian, positive-semidefinite convention.
///
/// Per triangle ijk with opposite-angle cotangents c_i, c_j, c_k the block
///
///     1/2 [ c_j + c_k     -c_k r_ji      -c_j r_ki  ]
///         [ -c_k r_ij     c_k + c_i      -c_i r_kj  ]
///         [ -c_j r_ik     -c_i r_jk      c_i + c_j  ]
///
/// is accumulated, where r_ab carries coefficients from the plane of a to
/// the plane of b, so entry (i, j) transports u_j into the frame of i.
///
struct ConnectionLaplacian
{
    SparseMatrixC matrix;
};

/// Diagonal lumped mass matrix of barycentric vertex areas.
struct MassMatrix
{
    Eigen::VectorXd areas;

    Index size() const { return static_cast<Index>(areas.size()); }
    double total_area() const { return areas.sum(); }
};

ConnectionLaplacian assemble_connection_laplacian(const SurfaceMesh& mesh, const IntrinsicFrame& frame);
MassMatrix assemble_mass_matrix(const SurfaceMesh& mesh);
/// Cotan Laplacian, positive-semidefinite convention (rows sum to zero).
SparseMatrixR assemble_scalar_laplacian(const SurfaceMesh& mesh);

///
/// Face tangent frames: e0 along the first stored edge (v1 - v0), e1 = n x e0,
/// with each triangle's intrinsic 2D layout in that frame.
///
class FaceFrames
{
public:
    explicit FaceFrames(const SurfaceMesh& mesh);

    Index num_faces() const { return static_cast<Index>(m_layout.size()); }
    Vec3 e0(Index f) const { return m_e0.row(f).transpose(); }
    Vec3 e1(Index f) const { return m_e1.row(f).transpose(); }
    /// 2D coordinates of corner c of face f in its frame (corner 0 at the origin,
    /// corner 1 on the positive e0 axis).
    Eigen::Vector2d corner(Index f, int c) const { return m_layout[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)]; }

    Vec3 embed(Index f, Complex z) const { return z.real() * e0(f) + z.imag() * e1(f); }
    Complex express(Index f, const Vec3& x) const { return {x.dot(e0(f)), x.dot(e1(f))}; }

private:
    Positions m_e0;
    Positions m_e1;
    std::vector<std::array<Eigen::Vector2d, 3>> m_layout;
};

/// Piecewise-linear gradient of a vertex scalar field, one complex coefficient
/// per face in its face frame.
VectorXc face_gradient(const SurfaceMesh& mesh, const FaceFrames& face_frames, const Eigen::VectorXd& field);

///
/// Rotations carrying vertex tangent coefficients into incident face frames.
/// `angles(f, c)` is the transition angle for corner c of face f.
///
struct VertexToFaceTransport
{
    std::vector<Triangle> faces;
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> angles;

    Index num_faces() const { return static_cast<Index>(faces.size()); }
    Complex rotation(Index f, int c) const { return std::polar(1.0, angles(f, c)); }
};

VertexToFaceTransport build_vertex_to_face_transport(
    const SurfaceMesh& mesh,
    const IntrinsicFrame& frame,
    const FaceFrames& face_frames);

/// Per-face mean of the three transported vertex values.
VectorXc average_to_faces(const VertexToFaceTransport& transport, const VectorXc& vertex_values);

/// Matrix Market coordinate export ("complex general" / "real general").
void write_matrix_market(const SparseMatrixC& matrix, const std::filesystem::path& path);
void write_matrix_market(const SparseMatrixR& matrix, const std::filesystem::path& path);
void write_matrix_market(const MassMatrix& mass, const std::filesystem::path& path);

} // namespace vhn
