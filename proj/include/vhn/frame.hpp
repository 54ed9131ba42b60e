#pragma once

#include <vhn/mesh.hpp>

#include <complex>
#include <span>
#include <vector>

namespace vhn {

using Complex = std::complex<double>;

struct FrameOptions
{
    /// Optional per-vertex rotation (radians) applied to the canonical basis:
    /// e0' = cos(phi) e0 + sin(phi) e1. Empty means no rotation. Tangent
    /// coefficients expressed in the rotated basis are multiplied by e^{-i phi}.
    std::vector<double> basis_rotation;
};

///
/// Per-vertex tangent bases and discrete logarithmic-map / parallel-transport data.
///
/// The canonical basis at a vertex puts e0 along the tangent projection of its
/// first outgoing edge. Outgoing halfedges get angular coordinates accumulated
/// from corner angles and rescaled by 2*pi / angle_sum at interior vertices
/// (boundary vertices keep unscaled angles). Transport angles are exactly
/// antisymmetric: omega(twin(h)) == -omega(h).
///
class IntrinsicFrame
{
public:
    IntrinsicFrame() = default;

    Index num_vertices() const { return static_cast<Index>(m_rotation.size()); }

    Vec3 e0(Index v) const { return m_e0.row(v).transpose(); }
    Vec3 e1(Index v) const { return m_e1.row(v).transpose(); }
    Vec3 normal(Index v) const { return m_normal.row(v).transpose(); }

    /// Total interior angle at v.
    double angle_sum(Index v) const { return m_angle_sum[static_cast<std::size_t>(v)]; }
    /// 2*pi / angle_sum for interior vertices, 1 on the boundary.
    double angle_scale(Index v) const { return m_angle_scale[static_cast<std::size_t>(v)]; }
    double basis_rotation(Index v) const { return m_rotation[static_cast<std::size_t>(v)]; }

    /// Normalized angular coordinate of halfedge h in the canonical basis of
    /// from_vertex(h), in [0, 2*pi).
    double canonical_angle(Index h) const { return m_canonical_angle[static_cast<std::size_t>(h)]; }
    /// Angular coordinate of h measured from the (possibly rotated) basis e0.
    double halfedge_angle(Index h) const { return m_halfedge_angle[static_cast<std::size_t>(h)]; }

    /// Angle of the rotation carrying tangent coefficients from the plane of
    /// from_vertex(h) to the plane of to_vertex(h), in (-pi, pi].
    double transport_angle(Index h) const { return m_transport_angle[static_cast<std::size_t>(h)]; }
    /// Unit complex r_ij for h = i -> j.
    Complex transport(Index h) const { return std::polar(1.0, transport_angle(h)); }

    /// Embed tangent coefficients z at v as a 3D vector re*e0 + im*e1.
    Vec3 embed(Index v, Complex z) const { return z.real() * e0(v) + z.imag() * e1(v); }
    /// Project a 3D vector onto the tangent plane at v and express it in the basis.
    Complex express(Index v, const Vec3& x) const { return {x.dot(e0(v)), x.dot(e1(v))}; }

private:
    friend IntrinsicFrame build_frames(const SurfaceMesh&, const FrameOptions&);

    Positions m_e0;
    Positions m_e1;
    Positions m_normal;
    std::vector<double> m_angle_sum;
    std::vector<double> m_angle_scale;
    std::vector<double> m_rotation;
    std::vector<double> m_canonical_angle;
    std::vector<double> m_halfedge_angle;
    std::vector<double> m_transport_angle;
};

/// Build deterministic tangent frames and transport rotations.
IntrinsicFrame build_frames(const SurfaceMesh& mesh, const FrameOptions& options = {});

/// Per-vertex rotations that make every basis e0 the tangent projection of
/// `direction` (the global basis on a planar mesh whose normal is e0 x e1).
std::vector<double> rotations_aligning_to(const IntrinsicFrame& frame, const Vec3& direction);

/// Product of transport rotations along a vertex cycle. The cycle is closed
/// implicitly unless the last vertex repeats the first. Throws ValidationError
/// when consecutive vertices are not adjacent.
Complex transport_loop_holonomy(
    const SurfaceMesh& mesh,
    const IntrinsicFrame& frame,
    std::span<const Index> vertex_loop);

/// Wrap an angle to [0, 2*pi).
double wrap_angle_positive(double a);
/// Wrap an angle to (-pi, pi].
double wrap_angle_signed(double a);

} // namespace vhn
