#include "oracles.hpp"

#include <vhn/error.hpp>
#include <vhn/hash.hpp>
#include <vhn/mesh.hpp>
#include <vhn/shapes.hpp>

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace vhn;

namespace {

SurfaceMesh right_triangle()
{
    return parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
}

std::string error_of(std::string_view text)
{
    try {
        parse_obj(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("single right triangle")
{
    const SurfaceMesh m = right_triangle();
    CHECK(m.num_faces() == 1);
    CHECK(m.num_edges() == 3);
    CHECK(m.face_area(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.corner_angle(0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));
    CHECK(std::abs(m.opposite_cotan(1)) < 1e-15);
    CHECK(m.opposite_cotan(2) == doctest::Approx(1.0).epsilon(1e-14));
    for (Index v = 0; v < 3; ++v) CHECK(m.vertex_area(v) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(m.has_boundary());
    CHECK(m.num_halfedges() == 6);
}

TEST_CASE("obj parsing ignores other records and accepts slashed indices")
{
    const SurfaceMesh m = parse_obj("# c\no obj\nv 0 0 0\nvn 0 0 1\nv 1 0 0\nv 0 1 0\nvt 0 0\ns off\nf 1/1/1 2//1 3/1\n");
    CHECK(m.num_faces() == 1);
    const SurfaceMesh neg = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
    CHECK(neg.face(0) == Triangle{0, 1, 2});
}

TEST_CASE("obj errors")
{
    CHECK(error_of("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").find("non-triangular face") != std::string::npos);
    CHECK(error_of("v 0 0 0\nv 1 x 0\n").find("line 2") != std::string::npos);
    CHECK(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").find("line 4") != std::string::npos);
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 2\n").empty());
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").empty()); // degenerate
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nf 1 2 3\n").empty()); // isolated vertex
    CHECK_FALSE(error_of("").empty());
    // three faces on one edge
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n").empty());
    // bowtie: two fans sharing only a vertex
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nv -1 0 0\nv 0 -1 0\nf 1 2 3\nf 1 4 5\n").empty());
    // inconsistent orientation
    CHECK_FALSE(error_of("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 3 4\n").empty());
}

TEST_CASE("missing file is an I/O error")
{
    CHECK_THROWS_AS(load_obj("/nonexistent/mesh.obj"), IoError);
}

TEST_CASE("icosahedron counts")
{
    const SurfaceMesh m = shapes::icosahedron();
    CHECK(m.num_vertices() == 12);
    CHECK(m.num_faces() == 20);
    CHECK(static_cast<std::size_t>(m.num_edges()) == oracle::count_edges(m.faces()));
    CHECK(m.num_edges() == 30);
    CHECK(m.euler_characteristic() == 2);
    CHECK_FALSE(m.has_boundary());
}

TEST_CASE("halfedge structure")
{
    for (const SurfaceMesh& m : {shapes::icosphere(2), shapes::grid(4, 3, 2.0, 1.0, true), shapes::pyramid_cone(5, 0.7)}) {
        CHECK(static_cast<std::size_t>(m.num_edges()) == oracle::count_edges(m.faces()));
        for (Index h = 0; h < m.num_halfedges(); ++h) {
            const Index t = m.twin(h);
            REQUIRE(t >= 0);
            CHECK(m.twin(t) == h);
            CHECK(m.from_vertex(t) == m.to_vertex(h));
            CHECK(m.edge(t) == m.edge(h));
            CHECK_FALSE((m.is_boundary_halfedge(h) && m.is_boundary_halfedge(t)));
        }
        double total = 0.0;
        for (Index v = 0; v < m.num_vertices(); ++v) {
            const auto ring = m.outgoing(v);
            for (Index h : ring) CHECK(m.from_vertex(h) == v);
            // CCW: the next outgoing halfedge follows prev(h)'s twin
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                const Index h = ring[i];
                REQUIRE_FALSE(m.is_boundary_halfedge(h));
                CHECK(m.twin(m.prev(h)) == ring[i + 1]);
            }
            if (!m.is_boundary_vertex(v)) {
                CHECK(m.twin(m.prev(ring.back())) == ring.front());
                Index lowest = m.to_vertex(ring.front());
                for (Index h : ring) CHECK(m.to_vertex(h) >= lowest);
            } else {
                CHECK(m.is_boundary_halfedge(ring.back()));
            }
            total += m.vertex_area(v);
        }
        CHECK(total == doctest::Approx(m.total_area()).epsilon(1e-12));
    }
}

TEST_CASE("angle sums and cotangents")
{
    const SurfaceMesh g = shapes::grid(4, 4, 1.0, 1.0, true);
    for (Index v = 0; v < g.num_vertices(); ++v) {
        if (!g.is_boundary_vertex(v)) CHECK(g.angle_sum(v) == doctest::Approx(2 * std::numbers::pi).epsilon(1e-12));
    }
    const SurfaceMesh m = shapes::scaled(shapes::icosphere(1), Vec3(1.0, 0.7, 0.4));
    for (Index h = 0; h < 3 * m.num_faces(); ++h) {
        const Index f = h / 3;
        const Triangle& t = m.face(f);
        const Index c = h % 3;
        const Vec3 apex = m.position(t[static_cast<std::size_t>((c + 2) % 3)]);
        const double cot = oracle::embedded_cotan(apex, m.position(t[static_cast<std::size_t>(c)]),
                                                  m.position(t[static_cast<std::size_t>((c + 1) % 3)]));
        CHECK(m.opposite_cotan(h) == doctest::Approx(cot).epsilon(1e-10));
    }
    const SurfaceMesh cube = shapes::subdivided_cube(1);
    CHECK(cube.angle_sum(0) == doctest::Approx(1.5 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("vertex normals on a sphere point outward")
{
    const SurfaceMesh m = shapes::icosphere(2);
    for (Index v = 0; v < m.num_vertices(); ++v) {
        CHECK(m.vertex_normal(v).dot(m.position(v).normalized()) > 0.99);
        CHECK(m.vertex_normal(v).norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("rigid motion leaves intrinsic quantities unchanged")
{
    const SurfaceMesh m = shapes::scaled(shapes::icosphere(2), Vec3(1.0, 0.75, 0.5));
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const SurfaceMesh t = transformed(m, R, Vec3(3.0, -1.0, 2.0));
    for (Index h = 0; h < 3 * m.num_faces(); ++h) {
        CHECK(std::abs(m.corner_angle(h) - t.corner_angle(h)) < 1e-12);
        CHECK(std::abs(m.opposite_cotan(h) - t.opposite_cotan(h)) < 1e-10);
    }
}

TEST_CASE("obj round trip and content hash")
{
    const SurfaceMesh m = shapes::icosphere(1);
    const auto path = std::filesystem::temp_directory_path() / "vhn_test_roundtrip.obj";
    save_obj(m, path);
    const SurfaceMesh r = load_obj(path);
    CHECK(r.positions() == m.positions());
    CHECK(r.faces() == m.faces());
    CHECK(content_hash(r) == content_hash(m));
    CHECK(content_hash(transformed(m, Eigen::Matrix3d::Identity(), Vec3(1e-9, 0, 0))) != content_hash(m));
    std::filesystem::remove(path);
}

TEST_CASE("fixtures")
{
    CHECK(shapes::icosphere(0).num_vertices() == 12);
    CHECK(shapes::icosphere(3).num_vertices() == 642);
    CHECK(shapes::icosphere(4).num_vertices() == 2562);
    const SurfaceMesh cube = shapes::subdivided_cube(3);
    CHECK(cube.euler_characteristic() == 2);
    CHECK_FALSE(cube.has_boundary());
    const SurfaceMesh flat = shapes::grid(6, 4, 3.0, 2.0);
    const SurfaceMesh bent = shapes::bent_grid(6, 4, 3.0, 2.0, 1.2);
    REQUIRE(flat.num_faces() == bent.num_faces());
    CHECK(flat.faces() == bent.faces());
    for (Index h = 0; h < flat.num_halfedges(); ++h) CHECK(std::abs(flat.edge_length(h) - bent.edge_length(h)) < 1e-12);
}
