#include <vhn/error.hpp>
#include <vhn/mesh.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace vhn {

namespace {

std::uint64_t directed_key(Index a, Index b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

/// Triangle area from side lengths (Kahan's stable Heron formula).
double area_from_lengths(double a, double b, double c)
{
    std::array<double, 3> s{a, b, c};
    std::sort(s.begin(), s.end(), std::greater<>());
    const double x = s[0], y = s[1], z = s[2];
    const double p = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
    return 0.25 * std::sqrt(std::max(p, 0.0));
}

} // namespace

SurfaceMesh::SurfaceMesh(Positions positions, std::vector<Triangle> faces, const Tolerances& tol)
    : m_positions(std::move(positions))
    , m_faces(std::move(faces))
{
    if (m_faces.empty()) {
        throw ValidationError("mesh has no faces");
    }
    if (!m_positions.allFinite()) {
        throw ValidationError("mesh has non-finite vertex positions");
    }
    build_connectivity();
    build_one_rings();
    build_geometry(tol);
}

void SurfaceMesh::build_connectivity()
{
    const Index nv = num_vertices();
    const Index nf = num_faces();
    m_from.resize(static_cast<std::size_t>(3 * nf));
    m_to.resize(static_cast<std::size_t>(3 * nf));

    std::unordered_map<std::uint64_t, Index> directed;
    directed.reserve(static_cast<std::size_t>(3 * nf));
    for (Index f = 0; f < nf; ++f) {
        const Triangle& t = face(f);
        for (int c = 0; c < 3; ++c) {
            if (t[c] < 0 || t[c] >= nv) {
                throw ValidationError(
                    "face " + std::to_string(f) + " references vertex " + std::to_string(t[c]) +
                    " out of range [0, " + std::to_string(nv) + ")");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[2] == t[0]) {
            throw ValidationError("face " + std::to_string(f) + " repeats a vertex");
        }
        for (int c = 0; c < 3; ++c) {
            const Index h = 3 * f + c;
            const Index a = t[c];
            const Index b = t[(c + 1) % 3];
            m_from[static_cast<std::size_t>(h)] = a;
            m_to[static_cast<std::size_t>(h)] = b;
            if (!directed.emplace(directed_key(a, b), h).second) {
                throw ValidationError(
                    "non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) +
                    "): more than two incident faces or inconsistent orientation");
            }
        }
    }

    m_twin.assign(static_cast<std::size_t>(3 * nf), invalid_index);
    for (Index h = 0; h < 3 * nf; ++h) {
        auto it = directed.find(directed_key(to_vertex(h), from_vertex(h)));
        if (it != directed.end()) {
            m_twin[static_cast<std::size_t>(h)] = it->second;
        }
    }
    // Boundary halfedges close every open edge.
    for (Index h = 0; h < 3 * nf; ++h) {
        if (m_twin[static_cast<std::size_t>(h)] == invalid_index) {
            const Index b = static_cast<Index>(m_to.size());
            m_from.push_back(to_vertex(h));
            m_to.push_back(from_vertex(h));
            m_twin.push_back(h);
            m_twin[static_cast<std::size_t>(h)] = b;
        }
    }

    m_edge.assign(m_to.size(), invalid_index);
    Index e = 0;
    for (Index h = 0; h < num_halfedges(); ++h) {
        if (m_edge[static_cast<std::size_t>(h)] == invalid_index) {
            m_edge[static_cast<std::size_t>(h)] = e;
            m_edge[static_cast<std::size_t>(twin(h))] = e;
            ++e;
        }
    }
    m_num_edges = e;
}

void SurfaceMesh::build_one_rings()
{
    const Index nv = num_vertices();
    std::vector<Index> count(static_cast<std::size_t>(nv), 0);
    std::vector<Index> any_out(static_cast<std::size_t>(nv), invalid_index);
    std::vector<Index> boundary_out(static_cast<std::size_t>(nv), invalid_index);
    std::vector<Index> fan_start(static_cast<std::size_t>(nv), invalid_index);
    m_vertex_boundary.assign(static_cast<std::size_t>(nv), false);

    for (Index h = 0; h < num_halfedges(); ++h) {
        const auto v = static_cast<std::size_t>(from_vertex(h));
        ++count[v];
        if (!is_boundary_halfedge(h) && any_out[v] == invalid_index) any_out[v] = h;
        if (!is_boundary_halfedge(h) && is_boundary_halfedge(twin(h))) fan_start[v] = h;
        if (is_boundary_halfedge(h)) {
            if (boundary_out[v] != invalid_index) {
                throw ValidationError(
                    "non-manifold vertex " + std::to_string(v) + ": more than one boundary fan");
            }
            boundary_out[v] = h;
            m_vertex_boundary[v] = true;
        }
    }

    m_ring_offsets.assign(static_cast<std::size_t>(nv) + 1, 0);
    m_ring.clear();
    m_ring.reserve(static_cast<std::size_t>(num_halfedges()));
    std::vector<Index> fan;
    for (Index v = 0; v < nv; ++v) {
        const auto vs = static_cast<std::size_t>(v);
        if (count[vs] == 0) {
            throw ValidationError("vertex " + std::to_string(v) + " has no incident faces");
        }
        fan.clear();
        if (m_vertex_boundary[vs]) {
            // The fan starts at the face halfedge whose clockwise side is outside.
            Index h = fan_start[vs];
            while (true) {
                fan.push_back(h);
                if (is_boundary_halfedge(h)) break;
                h = twin(prev(h));
                if (static_cast<Index>(fan.size()) > count[vs]) break;
            }
        } else {
            const Index start = any_out[vs];
            Index h = start;
            do {
                fan.push_back(h);
                h = twin(prev(h));
            } while (h != start && static_cast<Index>(fan.size()) <= count[vs]);
            auto lowest = std::min_element(fan.begin(), fan.end(), [&](Index a, Index b) {
                return to_vertex(a) < to_vertex(b);
            });
            std::rotate(fan.begin(), lowest, fan.end());
        }
        if (static_cast<Index>(fan.size()) != count[vs]) {
            throw ValidationError(
                "non-manifold vertex " + std::to_string(v) + ": one-ring is not a single fan");
        }
        m_ring.insert(m_ring.end(), fan.begin(), fan.end());
        m_ring_offsets[vs + 1] = static_cast<Index>(m_ring.size());
    }
}

void SurfaceMesh::build_geometry(const Tolerances& tol)
{
    const Index nv = num_vertices();
    const Index nf = num_faces();

    const Vec3 lo = m_positions.colwise().minCoeff().transpose();
    const Vec3 hi = m_positions.colwise().maxCoeff().transpose();
    m_bbox_diagonal = (hi - lo).norm();

    m_edge_length.assign(static_cast<std::size_t>(num_edges()), 0.0);
    for (Index h = 0; h < num_halfedges(); ++h) {
        m_edge_length[static_cast<std::size_t>(edge(h))] =
            (position(to_vertex(h)) - position(from_vertex(h))).norm();
    }

    m_corner_angle.assign(static_cast<std::size_t>(3 * nf), 0.0);
    m_opposite_cotan.assign(static_cast<std::size_t>(3 * nf), 0.0);
    m_face_area.assign(static_cast<std::size_t>(nf), 0.0);
    m_vertex_area.assign(static_cast<std::size_t>(nv), 0.0);
    m_angle_sum.assign(static_cast<std::size_t>(nv), 0.0);
    m_face_normal.resize(nf, 3);
    m_vertex_normal = Positions::Zero(nv, 3);
    m_total_area = 0.0;

    const double min_area = tol.degenerate_area * m_bbox_diagonal * m_bbox_diagonal;
    for (Index f = 0; f < nf; ++f) {
        // l[c] is the length of the edge opposite corner c.
        std::array<double, 3> l{};
        for (int c = 0; c < 3; ++c) {
            l[c] = edge_length(3 * f + (c + 1) % 3);
        }
        const double area = area_from_lengths(l[0], l[1], l[2]);
        if (!(area > min_area)) {
            throw ValidationError(
                "degenerate face " + std::to_string(f) + " (area " + std::to_string(area) + ")");
        }
        m_face_area[static_cast<std::size_t>(f)] = area;
        m_total_area += area;

        const Triangle& t = face(f);
        const Vec3 n = (position(t[1]) - position(t[0])).cross(position(t[2]) - position(t[0]));
        m_face_normal.row(f) = n.normalized().transpose();

        for (int c = 0; c < 3; ++c) {
            const double a = l[c];
            const double b = l[(c + 1) % 3];
            const double d = l[(c + 2) % 3];
            const double num = b * b + d * d - a * a;
            const double angle = std::atan2(4.0 * area, num);
            const Index h = 3 * f + c;
            m_corner_angle[static_cast<std::size_t>(h)] = angle;
            // The halfedge opposite corner c is the one leaving corner c + 1.
            m_opposite_cotan[static_cast<std::size_t>(3 * f + (c + 1) % 3)] = num / (4.0 * area);
            m_angle_sum[static_cast<std::size_t>(t[c])] += angle;
            m_vertex_area[static_cast<std::size_t>(t[c])] += area / 3.0;
            m_vertex_normal.row(t[c]) += angle * m_face_normal.row(f);
        }
    }
    for (Index v = 0; v < nv; ++v) {
        m_vertex_normal.row(v).normalize();
    }
}

std::span<const Index> SurfaceMesh::outgoing(Index v) const
{
    const auto begin = static_cast<std::size_t>(m_ring_offsets[static_cast<std::size_t>(v)]);
    const auto end = static_cast<std::size_t>(m_ring_offsets[static_cast<std::size_t>(v) + 1]);
    return std::span<const Index>(m_ring).subspan(begin, end - begin);
}

std::optional<Index> SurfaceMesh::find_halfedge(Index i, Index j) const
{
    if (i < 0 || i >= num_vertices()) return std::nullopt;
    for (Index h : outgoing(i)) {
        if (to_vertex(h) == j) return h;
    }
    return std::nullopt;
}

bool SurfaceMesh::has_boundary() const
{
    return num_halfedges() > 3 * num_faces();
}

double SurfaceMesh::mean_edge_length() const
{
    double sum = 0.0;
    for (double l : m_edge_length) sum += l;
    return sum / static_cast<double>(m_edge_length.size());
}

// ---------------------------------------------------------------------------
// OBJ I/O

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view tok, std::size_t line)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
        throw ParseError("malformed number '" + std::string(tok) + "'", line);
    }
    return value;
}

Index parse_face_index(std::string_view tok, Index vertex_count, std::size_t line)
{
    const auto slash = tok.find('/');
    const std::string_view head = tok.substr(0, slash);
    long value = 0;
    auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
    if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
        throw ParseError("malformed face index '" + std::string(tok) + "'", line);
    }
    // Negative indices are relative to the vertices read so far.
    const long index = value > 0 ? value - 1 : vertex_count + value;
    if (index < 0) {
        throw ParseError("face index '" + std::string(tok) + "' out of range", line);
    }
    return static_cast<Index>(index);
}

} // namespace

SurfaceMesh parse_obj(std::string_view text, const Tolerances& tol)
{
    std::vector<double> coords;
    std::vector<Triangle> faces;
    std::vector<std::size_t> face_lines;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        const std::string_view raw =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string_view line = trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = trim(line.substr(0, hash));
        }
        if (line.empty()) continue;
        const auto tokens = split_ws(line);
        if (tokens[0] == "v") {
            if (tokens.size() < 4 || tokens.size() > 5) {
                throw ParseError("vertex record needs 3 coordinates", line_no);
            }
            for (int k = 1; k <= 3; ++k) coords.push_back(parse_double(tokens[static_cast<std::size_t>(k)], line_no));
        } else if (tokens[0] == "f") {
            if (tokens.size() < 4) {
                throw ParseError("face record needs at least 3 vertices", line_no);
            }
            if (tokens.size() > 4) {
                throw ParseError("non-triangular face", line_no);
            }
            const auto nv = static_cast<Index>(coords.size() / 3);
            Triangle t{};
            for (int k = 0; k < 3; ++k) {
                t[static_cast<std::size_t>(k)] =
                    parse_face_index(tokens[static_cast<std::size_t>(k) + 1], nv, line_no);
            }
            faces.push_back(t);
            face_lines.push_back(line_no);
        }
        // vn, vt, g, o, s, usemtl, mtllib, l, p: ignored.
    }
    if (coords.empty()) throw ValidationError("OBJ has no vertex records");
    if (faces.empty()) throw ValidationError("OBJ has no face records");

    const auto nv = static_cast<Index>(coords.size() / 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (Index i : faces[f]) {
            if (i >= nv) throw ParseError("face index " + std::to_string(i + 1) + " out of range (" + std::to_string(nv) + " vertices)", face_lines[f]);
        }
    }
    Positions positions(static_cast<Eigen::Index>(nv), 3);
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        for (int k = 0; k < 3; ++k) positions(i, k) = coords[static_cast<std::size_t>(3 * i + k)];
    }
    return SurfaceMesh(std::move(positions), std::move(faces), tol);
}

SurfaceMesh load_obj(const std::filesystem::path& path, const Tolerances& tol)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open OBJ file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    try {
        return parse_obj(ss.str(), tol);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

void save_obj(const SurfaceMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write OBJ file '" + path.string() + "'");
    out.precision(17);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        const Vec3 p = mesh.position(v);
        out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (const Triangle& t : mesh.faces()) {
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

SurfaceMesh transformed(const SurfaceMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation)
{
    Positions p = mesh.positions();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        p.row(i) = (rotation * p.row(i).transpose() + translation).transpose();
    }
    return SurfaceMesh(std::move(p), mesh.faces());
}

} // namespace vhn
