#include <vhn/error.hpp>
#include <vhn/operators.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>

namespace vhn {

namespace {

/// Cotan edge weights 1/2 (cot a + cot b), indexed by edge; each edge visited
/// in halfedge order so accumulation is deterministic.
std::vector<double> cotan_edge_weights(const SurfaceMesh& mesh)
{
    std::vector<double> w(static_cast<std::size_t>(mesh.num_edges()), 0.0);
    for (Index h = 0; h < 3 * mesh.num_faces(); ++h) {
        w[static_cast<std::size_t>(mesh.edge(h))] += 0.5 * mesh.opposite_cotan(h);
    }
    return w;
}

/// First halfedge of every edge, in edge-index order.
std::vector<Index> edge_halfedges(const SurfaceMesh& mesh)
{
    std::vector<Index> he(static_cast<std::size_t>(mesh.num_edges()), invalid_index);
    for (Index h = 0; h < mesh.num_halfedges(); ++h) {
        auto& slot = he[static_cast<std::size_t>(mesh.edge(h))];
        if (slot == invalid_index) slot = h;
    }
    return he;
}

} // namespace

ConnectionLaplacian assemble_connection_laplacian(const SurfaceMesh& mesh, const IntrinsicFrame& frame)
{
    const auto weights = cotan_edge_weights(mesh);
    const auto halfedges = edge_halfedges(mesh);
    const Index n = mesh.num_vertices();

    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(n + 2 * mesh.num_edges()));
    std::vector<double> diagonal(static_cast<std::size_t>(n), 0.0);
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Index h = halfedges[static_cast<std::size_t>(e)];
        const Index a = mesh.from_vertex(h);
        const Index b = mesh.to_vertex(h);
        const double w = weights[static_cast<std::size_t>(e)];
        // Row a acts on u_b expressed at b: carry it from b to a.
        const Complex r_ba = std::polar(1.0, -frame.transport_angle(h));
        triplets.emplace_back(a, b, -w * r_ba);
        triplets.emplace_back(b, a, -w * std::conj(r_ba));
        diagonal[static_cast<std::size_t>(a)] += w;
        diagonal[static_cast<std::size_t>(b)] += w;
    }
    for (Index v = 0; v < n; ++v) {
        triplets.emplace_back(v, v, Complex(diagonal[static_cast<std::size_t>(v)], 0.0));
    }
    ConnectionLaplacian L;
    L.matrix.resize(n, n);
    L.matrix.setFromTriplets(triplets.begin(), triplets.end());
    L.matrix.makeCompressed();
    return L;
}

SparseMatrixR assemble_scalar_laplacian(const SurfaceMesh& mesh)
{
    const auto weights = cotan_edge_weights(mesh);
    const auto halfedges = edge_halfedges(mesh);
    const Index n = mesh.num_vertices();

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n + 2 * mesh.num_edges()));
    std::vector<double> diagonal(static_cast<std::size_t>(n), 0.0);
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Index h = halfedges[static_cast<std::size_t>(e)];
        const Index a = mesh.from_vertex(h);
        const Index b = mesh.to_vertex(h);
        const double w = weights[static_cast<std::size_t>(e)];
        triplets.emplace_back(a, b, -w);
        triplets.emplace_back(b, a, -w);
        diagonal[static_cast<std::size_t>(a)] += w;
        diagonal[static_cast<std::size_t>(b)] += w;
    }
    for (Index v = 0; v < n; ++v) {
        triplets.emplace_back(v, v, diagonal[static_cast<std::size_t>(v)]);
    }
    SparseMatrixR L(n, n);
    L.setFromTriplets(triplets.begin(), triplets.end());
    L.makeCompressed();
    return L;
}

MassMatrix assemble_mass_matrix(const SurfaceMesh& mesh)
{
    MassMatrix M;
    M.areas.resize(mesh.num_vertices());
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        M.areas[v] = mesh.vertex_area(v);
    }
    return M;
}

FaceFrames::FaceFrames(const SurfaceMesh& mesh)
{
    const Index nf = mesh.num_faces();
    m_e0.resize(nf, 3);
    m_e1.resize(nf, 3);
    m_layout.resize(static_cast<std::size_t>(nf));
    for (Index f = 0; f < nf; ++f) {
        const Triangle& t = mesh.face(f);
        const Vec3 n = mesh.face_normal(f);
        const Vec3 e0 = (mesh.position(t[1]) - mesh.position(t[0])).normalized();
        m_e0.row(f) = e0.transpose();
        m_e1.row(f) = n.cross(e0).transpose();

        const double l01 = mesh.edge_length(3 * f);
        const double l02 = mesh.edge_length(3 * f + 2);
        const double alpha = mesh.corner_angle(3 * f);
        auto& layout = m_layout[static_cast<std::size_t>(f)];
        layout[0] = Eigen::Vector2d::Zero();
        layout[1] = Eigen::Vector2d(l01, 0.0);
        layout[2] = Eigen::Vector2d(l02 * std::cos(alpha), l02 * std::sin(alpha));
    }
}

VectorXc face_gradient(const SurfaceMesh& mesh, const FaceFrames& face_frames, const Eigen::VectorXd& field)
{
    if (field.size() != mesh.num_vertices()) {
        throw ValidationError("face_gradient: field has " + std::to_string(field.size()) +
                              " values, mesh has " + std::to_string(mesh.num_vertices()) + " vertices");
    }
    VectorXc grad(mesh.num_faces());
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        const Triangle& t = mesh.face(f);
        const Eigen::Vector2d p0 = face_frames.corner(f, 0);
        const Eigen::Vector2d p1 = face_frames.corner(f, 1);
        const Eigen::Vector2d p2 = face_frames.corner(f, 2);
        const double twice_area = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
        const std::array<Eigen::Vector2d, 3> p{p0, p1, p2};
        Eigen::Vector2d g = Eigen::Vector2d::Zero();
        for (int c = 0; c < 3; ++c) {
            // Gradient of the hat function at corner c: opposite edge rotated by +90 degrees.
            const Eigen::Vector2d edge = p[static_cast<std::size_t>((c + 2) % 3)] - p[static_cast<std::size_t>((c + 1) % 3)];
            g += field[t[static_cast<std::size_t>(c)]] * Eigen::Vector2d(-edge.y(), edge.x());
        }
        g /= twice_area;
        grad[f] = Complex(g.x(), g.y());
    }
    return grad;
}

VertexToFaceTransport build_vertex_to_face_transport(
    const SurfaceMesh& mesh,
    const IntrinsicFrame& frame,
    const FaceFrames& face_frames)
{
    VertexToFaceTransport T;
    T.faces = mesh.faces();
    T.angles.resize(mesh.num_faces(), 3);
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const Eigen::Vector2d d = face_frames.corner(f, (c + 1) % 3) - face_frames.corner(f, c);
            const double in_face = std::atan2(d.y(), d.x());
            T.angles(f, c) = wrap_angle_signed(in_face - frame.halfedge_angle(3 * f + c));
        }
    }
    return T;
}

VectorXc average_to_faces(const VertexToFaceTransport& transport, const VectorXc& vertex_values)
{
    Index max_vertex = -1;
    for (const Triangle& t : transport.faces) {
        max_vertex = std::max({max_vertex, t[0], t[1], t[2]});
    }
    if (vertex_values.size() <= max_vertex) {
        throw ValidationError("average_to_faces: field has " + std::to_string(vertex_values.size()) +
                              " values but faces reference vertex " + std::to_string(max_vertex));
    }
    VectorXc out(transport.num_faces());
    for (Index f = 0; f < transport.num_faces(); ++f) {
        const Triangle& t = transport.faces[static_cast<std::size_t>(f)];
        Complex sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            sum += transport.rotation(f, c) * vertex_values[t[static_cast<std::size_t>(c)]];
        }
        out[f] = sum / 3.0;
    }
    return out;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(17);
    return out;
}

} // namespace

void write_matrix_market(const SparseMatrixC& matrix, const std::filesystem::path& path)
{
    auto out = open_for_write(path);
    out << "%%MatrixMarket matrix coordinate complex general\n";
    out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
        for (SparseMatrixC::InnerIterator it(matrix, r); it; ++it) {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value().real() << ' '
                << it.value().imag() << '\n';
        }
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_matrix_market(const SparseMatrixR& matrix, const std::filesystem::path& path)
{
    auto out = open_for_write(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
        for (SparseMatrixR::InnerIterator it(matrix, r); it; ++it) {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
        }
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_matrix_market(const MassMatrix& mass, const std::filesystem::path& path)
{
    auto out = open_for_write(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << mass.size() << ' ' << mass.size() << ' ' << mass.size() << '\n';
    for (Index i = 0; i < mass.size(); ++i) {
        out << i + 1 << ' ' << i + 1 << ' ' << mass.areas[i] << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

} // namespace vhn
