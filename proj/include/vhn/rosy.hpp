#pragma once

#include <vhn/frame.hpp>
#include <vhn/operators.hpp>

#include <filesystem>
#include <string>

namespace vhn {

enum class Domain
{
    vertices,
    faces,
};

std::string_view to_string(Domain d);

/// N-fold rotationally symmetric field stored as one representative per element.
struct RosyField
{
    VectorXc values;
    int N = 4;
    Domain domain = Domain::vertices;
    /// Content hash of the mesh whose frames the coefficients refer to.
    std::string frame_hash;
};

/// Elementwise u^N.
VectorXc to_power_representation(const RosyField& field);

/// Canonical N-th root: magnitude |p|^(1/N), argument arg(p)/N in [0, 2*pi/N); 0 -> 0.
Complex canonical_root(Complex p, int N);
RosyField from_power_representation(const VectorXc& power, int N, Domain domain = Domain::vertices, std::string frame_hash = {});

/// Vertex N-Rosy field to faces: the N-th powers are carried into each face
/// frame (rotation e^{i N theta}), averaged, and the canonical root taken.
RosyField rosy_to_faces(const VertexToFaceTransport& transport, const RosyField& vertex_field);

///
/// ASCII field file, 17 significant digits:
///
///     VHNFIELD 1
///     domain <vertices|faces>
///     N <int>
///     count <int>
///     frame <hash or ->
///     <index> <re> <im> <e0 x y z> <e1 x y z> <embedded x y z>
///
/// Vertex fields use the vertex frames, face fields the face frames
/// (e0 along v1 - v0).
///
void export_field(const RosyField& field, const SurfaceMesh& mesh, const IntrinsicFrame& frame, const std::filesystem::path& path);
/// Reads coefficients back (frame columns are informational). Throws ParseError with line numbers.
RosyField import_field(const std::filesystem::path& path);

/// Per face, the N embedded directions u e^{2 pi i k / N}, k = 0..N-1:
///
///     VHNCROSS 1
///     N <int>
///     count <faces>
///     <face> x0 y0 z0 ... x{N-1} y{N-1} z{N-1}
///
void export_cross_field(const RosyField& face_field, const SurfaceMesh& mesh, const std::filesystem::path& path);

struct AngularError
{
    Eigen::VectorXd per_element; ///< radians, in [0, pi / N]
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
};

/// min_k |arg(a conj(b) e^{2 pi i k / N})| per element. Zero vectors have argument 0.
AngularError angular_error(const RosyField& a, const RosyField& b);

} // namespace vhn
