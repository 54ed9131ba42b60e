#include <vhn/error.hpp>
#include <vhn/frame.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace vhn {

double wrap_angle_positive(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r -= two_pi;
    return r;
}

double wrap_angle_signed(double a)
{
    double r = wrap_angle_positive(a);
    if (r > std::numbers::pi) r -= 2.0 * std::numbers::pi;
    return r;
}

IntrinsicFrame build_frames(const SurfaceMesh& mesh, const FrameOptions& options)
{
    const Index nv = mesh.num_vertices();
    const Index nh = mesh.num_halfedges();
    if (!options.basis_rotation.empty() && static_cast<Index>(options.basis_rotation.size()) != nv) {
        throw ValidationError("basis_rotation has " + std::to_string(options.basis_rotation.size()) +
                              " entries, mesh has " + std::to_string(nv) + " vertices");
    }

    IntrinsicFrame frame;
    frame.m_e0.resize(nv, 3);
    frame.m_e1.resize(nv, 3);
    frame.m_normal.resize(nv, 3);
    frame.m_angle_sum.resize(static_cast<std::size_t>(nv));
    frame.m_angle_scale.resize(static_cast<std::size_t>(nv));
    frame.m_rotation.assign(static_cast<std::size_t>(nv), 0.0);
    frame.m_canonical_angle.assign(static_cast<std::size_t>(nh), 0.0);
    frame.m_halfedge_angle.assign(static_cast<std::size_t>(nh), 0.0);
    frame.m_transport_angle.assign(static_cast<std::size_t>(nh), 0.0);

    const double min_edge = default_tolerances().degenerate_edge * mesh.bounding_box_diagonal();
    std::vector<double> cumulative;
    for (Index v = 0; v < nv; ++v) {
        const auto vs = static_cast<std::size_t>(v);
        const auto ring = mesh.outgoing(v);
        const Vec3 n = mesh.vertex_normal(v);
        const double theta = mesh.angle_sum(v);
        const double scale = mesh.is_boundary_vertex(v) ? 1.0 : 2.0 * std::numbers::pi / theta;
        frame.m_angle_sum[vs] = theta;
        frame.m_angle_scale[vs] = scale;

        cumulative.assign(ring.size(), 0.0);
        for (std::size_t k = 1; k < ring.size(); ++k) {
            cumulative[k] = cumulative[k - 1] + mesh.corner_angle(ring[k - 1]);
        }

        // e0 follows the first outgoing edge with a usable tangent projection.
        std::size_t seed = ring.size();
        Vec3 e0 = Vec3::Zero();
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const Vec3 d = mesh.position(mesh.to_vertex(ring[k])) - mesh.position(v);
            const Vec3 t = d - d.dot(n) * n;
            if (t.norm() > min_edge) {
                e0 = t.normalized();
                seed = k;
                break;
            }
        }
        if (seed == ring.size()) {
            throw NumericalError("vertex " + std::to_string(v) +
                                 ": every outgoing edge is degenerate in the tangent plane");
        }
        const double origin = scale * cumulative[seed];
        const double phi = options.basis_rotation.empty() ? 0.0 : options.basis_rotation[vs];
        const Vec3 e1 = n.cross(e0);
        const Vec3 r0 = std::cos(phi) * e0 + std::sin(phi) * e1;
        frame.m_e0.row(v) = r0.transpose();
        frame.m_e1.row(v) = n.cross(r0).transpose();
        frame.m_normal.row(v) = n.transpose();
        frame.m_rotation[vs] = phi;

        for (std::size_t k = 0; k < ring.size(); ++k) {
            const auto h = static_cast<std::size_t>(ring[k]);
            const double canonical =
                k == seed ? 0.0 : wrap_angle_positive(scale * cumulative[k] - origin);
            frame.m_canonical_angle[h] = canonical;
            frame.m_halfedge_angle[h] = phi == 0.0 ? canonical : wrap_angle_positive(canonical - phi);
        }
    }

    for (Index h = 0; h < nh; ++h) {
        const Index t = mesh.twin(h);
        if (h > t) continue;
        // The edge direction i->j has angle a_ij at i and a_ji + pi at j.
        const double omega = wrap_angle_signed(
            frame.halfedge_angle(t) - frame.halfedge_angle(h) + std::numbers::pi);
        frame.m_transport_angle[static_cast<std::size_t>(h)] = omega;
        frame.m_transport_angle[static_cast<std::size_t>(t)] = -omega;
    }
    return frame;
}

std::vector<double> rotations_aligning_to(const IntrinsicFrame& frame, const Vec3& direction)
{
    std::vector<double> phi(static_cast<std::size_t>(frame.num_vertices()));
    for (Index v = 0; v < frame.num_vertices(); ++v) {
        phi[static_cast<std::size_t>(v)] =
            frame.basis_rotation(v) + std::atan2(direction.dot(frame.e1(v)), direction.dot(frame.e0(v)));
    }
    return phi;
}

Complex transport_loop_holonomy(
    const SurfaceMesh& mesh,
    const IntrinsicFrame& frame,
    std::span<const Index> vertex_loop)
{
    if (vertex_loop.size() < 2) {
        throw ValidationError("holonomy loop needs at least two vertices");
    }
    std::size_t count = vertex_loop.size();
    if (vertex_loop.front() == vertex_loop.back()) --count;
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const Index a = vertex_loop[k];
        const Index b = vertex_loop[(k + 1) % count];
        const auto h = mesh.find_halfedge(a, b);
        if (!h) {
            throw ValidationError("holonomy loop: vertices " + std::to_string(a) + " and " +
                                  std::to_string(b) + " are not adjacent");
        }
        total += frame.transport_angle(*h);
    }
    return std::polar(1.0, total);
}

} // namespace vhn
