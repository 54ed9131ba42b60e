#pragma once

#include <vhn/tolerances.hpp>

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vhn {

using Index = int;
using Vec3 = Eigen::Vector3d;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangle = std::array<Index, 3>;

inline constexpr Index invalid_index = -1;

///
/// Validated manifold triangle mesh with halfedge adjacency and intrinsic
/// per-face quantities.
///
/// Halfedges `3f + c` (c = 0, 1, 2) belong to face f and run from corner c to
/// corner c + 1. Every interior halfedge without a twin gets an explicit
/// boundary halfedge (face = invalid_index) appended after the face halfedges,
/// so each vertex has exactly one outgoing halfedge per neighbor.
///
/// Corner angles, cotangents and areas are computed from edge lengths only.
///
class SurfaceMesh
{
public:
    /// Validate and build derived data. Throws ValidationError on non-manifold
    /// input, out-of-range or repeated indices, isolated vertices and degenerate faces.
    SurfaceMesh(Positions positions, std::vector<Triangle> faces, const Tolerances& tol = default_tolerances());

    Index num_vertices() const { return static_cast<Index>(m_positions.rows()); }
    Index num_faces() const { return static_cast<Index>(m_faces.size()); }
    Index num_halfedges() const { return static_cast<Index>(m_to.size()); }
    Index num_edges() const { return m_num_edges; }
    int euler_characteristic() const { return num_vertices() - num_edges() + num_faces(); }

    const Positions& positions() const { return m_positions; }
    Vec3 position(Index v) const { return m_positions.row(v).transpose(); }
    const std::vector<Triangle>& faces() const { return m_faces; }
    const Triangle& face(Index f) const { return m_faces[static_cast<std::size_t>(f)]; }

    // --- halfedge connectivity ---
    Index halfedge_face(Index h) const { return h < 3 * num_faces() ? h / 3 : invalid_index; }
    bool is_boundary_halfedge(Index h) const { return h >= 3 * num_faces(); }
    Index from_vertex(Index h) const { return m_from[static_cast<std::size_t>(h)]; }
    Index to_vertex(Index h) const { return m_to[static_cast<std::size_t>(h)]; }
    Index twin(Index h) const { return m_twin[static_cast<std::size_t>(h)]; }
    Index edge(Index h) const { return m_edge[static_cast<std::size_t>(h)]; }
    /// Face halfedges only.
    Index next(Index h) const { return 3 * (h / 3) + (h % 3 + 1) % 3; }
    Index prev(Index h) const { return 3 * (h / 3) + (h % 3 + 2) % 3; }
    /// Halfedge i -> j, if the edge exists.
    std::optional<Index> find_halfedge(Index i, Index j) const;

    /// Outgoing halfedges of v in counterclockwise order. Interior vertices
    /// start at the lowest-index neighbor; boundary vertices start at the
    /// boundary edge whose clockwise side is outside and end at the outgoing
    /// boundary halfedge.
    std::span<const Index> outgoing(Index v) const;
    bool is_boundary_vertex(Index v) const { return m_vertex_boundary[static_cast<std::size_t>(v)]; }
    bool has_boundary() const;

    // --- intrinsic geometry ---
    double edge_length(Index h) const { return m_edge_length[static_cast<std::size_t>(edge(h))]; }
    /// Interior angle at from_vertex(h) inside face(h). Face halfedges only.
    double corner_angle(Index h) const { return m_corner_angle[static_cast<std::size_t>(h)]; }
    /// Cotangent of the angle opposite face halfedge h.
    double opposite_cotan(Index h) const { return m_opposite_cotan[static_cast<std::size_t>(h)]; }
    double face_area(Index f) const { return m_face_area[static_cast<std::size_t>(f)]; }
    double vertex_area(Index v) const { return m_vertex_area[static_cast<std::size_t>(v)]; }
    double total_area() const { return m_total_area; }
    /// Sum of incident corner angles.
    double angle_sum(Index v) const { return m_angle_sum[static_cast<std::size_t>(v)]; }
    double mean_edge_length() const;

    // --- extrinsic geometry ---
    Vec3 face_normal(Index f) const { return m_face_normal.row(f).transpose(); }
    /// Angle-weighted average of incident face normals, normalized.
    Vec3 vertex_normal(Index v) const { return m_vertex_normal.row(v).transpose(); }
    double bounding_box_diagonal() const { return m_bbox_diagonal; }

private:
    void build_connectivity();
    void build_one_rings();
    void build_geometry(const Tolerances& tol);

    Positions m_positions;
    std::vector<Triangle> m_faces;

    std::vector<Index> m_from;
    std::vector<Index> m_to;
    std::vector<Index> m_twin;
    std::vector<Index> m_edge;
    Index m_num_edges = 0;

    std::vector<Index> m_ring_offsets;
    std::vector<Index> m_ring;
    std::vector<bool> m_vertex_boundary;

    std::vector<double> m_edge_length;
    std::vector<double> m_corner_angle;
    std::vector<double> m_opposite_cotan;
    std::vector<double> m_face_area;
    std::vector<double> m_vertex_area;
    std::vector<double> m_angle_sum;
    double m_total_area = 0.0;

    Positions m_face_normal;
    Positions m_vertex_normal;
    double m_bbox_diagonal = 0.0;
};

/// Parse an ASCII OBJ file (`v` and `f` records; everything else is ignored).
SurfaceMesh load_obj(const std::filesystem::path& path, const Tolerances& tol = default_tolerances());

/// Parse OBJ text. Line numbers in errors refer to `text`.
SurfaceMesh parse_obj(std::string_view text, const Tolerances& tol = default_tolerances());

void save_obj(const SurfaceMesh& mesh, const std::filesystem::path& path);

/// Rigidly transform positions (x -> R x + t); connectivity is unchanged.
SurfaceMesh transformed(const SurfaceMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation);

} // namespace vhn
