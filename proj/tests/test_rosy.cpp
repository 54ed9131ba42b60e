#include "oracles.hpp"

#include <vhn/error.hpp>
#include <vhn/hash.hpp>
#include <vhn/mesh.hpp>
#include <vhn/operators.hpp>
#include <vhn/rosy.hpp>
#include <vhn/shapes.hpp>

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

using namespace vhn;

namespace {

constexpr double pi = std::numbers::pi;

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "vhn_test_rosy";
    std::filesystem::create_directories(dir);
    return dir / name;
}

VectorXc random_vector(Index n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.2, 2.0);
    std::uniform_real_distribution<double> ang(-pi, pi);
    VectorXc v(n);
    for (Index i = 0; i < n; ++i) v[i] = std::polar(mag(rng), ang(rng));
    return v;
}

void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream(p) << s;
}

} // namespace

TEST_CASE("power representation and canonical root")
{
    RosyField f;
    f.N = 4;
    f.values.resize(3);
    f.values << Complex(1, 0), Complex(0, 2), std::polar(1.0, pi / 8);
    const VectorXc p = to_power_representation(f);
    CHECK(std::abs(p[0] - Complex(1, 0)) < 1e-15);
    CHECK(std::abs(p[1] - Complex(16, 0)) < 1e-13);
    CHECK(std::abs(p[2] - Complex(0, 1)) < 1e-15);

    CHECK(canonical_root(Complex(0, 0), 4) == Complex(0, 0));
    CHECK(std::abs(canonical_root(Complex(16, 0), 4) - Complex(2, 0)) < 1e-15);
    CHECK(std::abs(canonical_root(Complex(0, 1), 4) - std::polar(1.0, pi / 8)) < 1e-15);
    // arg(-1) = pi lies in [0, 2 pi), so the root is at pi / 4.
    CHECK(std::abs(canonical_root(Complex(-1, 0), 4) - std::polar(1.0, pi / 4)) < 1e-15);
    CHECK(std::abs(canonical_root(Complex(0, -1), 4) - std::polar(1.0, 3 * pi / 8)) < 1e-15);
    CHECK(std::abs(canonical_root(Complex(0, -1), 1) - Complex(0, -1)) < 1e-15);
    CHECK_THROWS_AS(canonical_root(Complex(1, 0), 0), ValidationError);

    // Root then power is the identity; power then root picks one of the N representatives.
    const VectorXc z = random_vector(200, 1);
    for (int N : {1, 2, 4, 6}) {
        for (Index i = 0; i < z.size(); ++i) {
            const Complex r = canonical_root(z[i], N);
            CHECK(std::abs(std::pow(r, N) - z[i]) < 1e-12 * std::max(1.0, std::abs(z[i])));
            double a = std::arg(r);
            if (a < 0) a += 2 * pi;
            CHECK(a < 2 * pi / N + 1e-15);
        }
        RosyField g;
        g.N = N;
        g.values = z;
        const RosyField back = from_power_representation(to_power_representation(g), N);
        CHECK(angular_error(back, g).max < 1e-12);
        CHECK((back.values.cwiseAbs() - z.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("field files round-trip exactly")
{
    const SurfaceMesh mesh = shapes::scaled(shapes::icosphere(1), Vec3(1.0, 0.7, 0.5));
    const IntrinsicFrame frame = build_frames(mesh);
    for (Domain d : {Domain::vertices, Domain::faces}) {
        RosyField f;
        f.N = 4;
        f.domain = d;
        f.frame_hash = content_hash(mesh);
        f.values = random_vector(d == Domain::vertices ? mesh.num_vertices() : mesh.num_faces(), 2);
        f.values[0] = Complex(1.0 / 3.0, -std::numeric_limits<double>::denorm_min());
        const auto path = scratch(std::string("round_") + std::string(to_string(d)) + ".field");
        export_field(f, mesh, frame, path);
        const RosyField back = import_field(path);
        CHECK(back.N == 4);
        CHECK(back.domain == d);
        CHECK(back.frame_hash == f.frame_hash);
        REQUIRE(back.values.size() == f.values.size());
        for (Index i = 0; i < f.values.size(); ++i) CHECK(back.values[i] == f.values[i]);
    }

    RosyField wrong;
    wrong.values = VectorXc::Zero(3);
    CHECK_THROWS_AS(export_field(wrong, mesh, frame, scratch("wrong.field")), ValidationError);
}

TEST_CASE("field file columns hold frames and embedded vectors")
{
    // Unit right triangle; vertex 0's e0 points along its first outgoing edge.
    const SurfaceMesh mesh = shapes::grid(1, 1, 1.0, 1.0);
    const IntrinsicFrame frame = build_frames(mesh);
    RosyField f;
    f.N = 1;
    f.values = VectorXc::Zero(mesh.num_vertices());
    f.values[0] = Complex(0.0, 2.0);
    const auto path = scratch("columns.field");
    export_field(f, mesh, frame, path);

    std::ifstream in(path);
    std::string line;
    for (int i = 0; i < 5; ++i) std::getline(in, line);
    std::getline(in, line);
    std::istringstream row(line);
    long index;
    double re, im;
    Vec3 e0, e1, emb;
    row >> index >> re >> im >> e0.x() >> e0.y() >> e0.z() >> e1.x() >> e1.y() >> e1.z() >> emb.x() >> emb.y() >> emb.z();
    CHECK(index == 0);
    CHECK((e0 - frame.e0(0)).norm() < 1e-15);
    CHECK((e1 - frame.e1(0)).norm() < 1e-15);
    // 2 i is twice the 90 degree rotation of e0 about the +z normal.
    CHECK((emb - 2.0 * Vec3(0, 0, 1).cross(frame.e0(0))).norm() < 1e-14);
}

TEST_CASE("malformed field files")
{
    const auto p = scratch("bad.field");
    write_text(p, "VHNFIELD 2\n");
    CHECK_THROWS_AS(import_field(p), ParseError);
    write_text(p, "VHNFIELD 1\ndomain edges\n");
    try {
        import_field(p);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
    write_text(p, "VHNFIELD 1\ndomain vertices\nN 4\ncount 2\nframe -\n0 1 0 1 0 0 0 1 0 1 0 0\n");
    CHECK_THROWS_AS(import_field(p), ParseError);
    write_text(p, "VHNFIELD 1\ndomain vertices\nN 4\ncount 1\nframe -\n0 1 x 1 0 0 0 1 0 1 0 0\n");
    CHECK_THROWS_AS(import_field(p), ParseError);
    write_text(p, "VHNFIELD 1\ndomain vertices\nN 0\ncount 0\nframe -\n");
    CHECK_THROWS(import_field(p));
    write_text(p, "VHNFIELD 1\ndomain vertices\nN 4\ncount 1\nframe -\n0 1 0 1 0 0 0 1 0 1 0 0\nextra\n");
    CHECK_THROWS_AS(import_field(p), ParseError);
    CHECK_THROWS_AS(import_field(scratch("missing.field")), IoError);

    write_text(p, "VHNFIELD 1\ndomain faces\nN 2\ncount 1\nframe -\n0 0.5 -0.25 1 0 0 0 1 0 1 0 0\n");
    const RosyField ok = import_field(p);
    CHECK(ok.domain == Domain::faces);
    CHECK(ok.N == 2);
    CHECK(ok.frame_hash.empty());
    CHECK(ok.values[0] == Complex(0.5, -0.25));
}

TEST_CASE("face transfer matches the loop oracle")
{
    // Planar, rigidly placed: transport is the identity on embedded vectors.
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Vec3(1.0, 2.0, -0.5).normalized()).toRotationMatrix();
    const SurfaceMesh mesh = transformed(shapes::grid(5, 4, 1.3, 1.0, true), R, Vec3(0.2, -1.0, 3.0));
    const IntrinsicFrame frame = build_frames(mesh);
    const FaceFrames ff(mesh);
    const VertexToFaceTransport T = build_vertex_to_face_transport(mesh, frame, ff);
    RosyField f;
    f.N = 4;
    f.values = random_vector(mesh.num_vertices(), 3);
    const RosyField faces = rosy_to_faces(T, f);
    CHECK(faces.domain == Domain::faces);
    REQUIRE(faces.values.size() == mesh.num_faces());

    for (Index fi = 0; fi < mesh.num_faces(); ++fi) {
        Complex sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            const Index v = mesh.faces()[static_cast<std::size_t>(fi)][static_cast<std::size_t>(c)];
            sum += std::pow(ff.express(fi, frame.embed(v, f.values[v])), 4);
        }
        const Complex expect = canonical_root(sum / 3.0, 4);
        CHECK(std::abs(faces.values[fi] - expect) < 1e-12);
    }

    RosyField wrong = f;
    wrong.domain = Domain::faces;
    CHECK_THROWS_AS(rosy_to_faces(T, wrong), ValidationError);
}

TEST_CASE("embedded fields do not depend on the tangent basis")
{
    const SurfaceMesh mesh = shapes::scaled(shapes::icosphere(2), Vec3(1.0, 0.8, 0.6));
    const IntrinsicFrame a = build_frames(mesh);
    FrameOptions opt;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-pi, pi);
    for (Index v = 0; v < mesh.num_vertices(); ++v) opt.basis_rotation.push_back(d(rng));
    const IntrinsicFrame b = build_frames(mesh, opt);
    const FaceFrames ff(mesh);

    RosyField fa;
    fa.N = 4;
    fa.values = random_vector(mesh.num_vertices(), 5);
    RosyField fb = fa;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        fb.values[v] *= std::polar(1.0, -opt.basis_rotation[static_cast<std::size_t>(v)]);
        CHECK((a.embed(v, fa.values[v]) - b.embed(v, fb.values[v])).norm() < 1e-12);
    }
    const RosyField faces_a = rosy_to_faces(build_vertex_to_face_transport(mesh, a, ff), fa);
    const RosyField faces_b = rosy_to_faces(build_vertex_to_face_transport(mesh, b, ff), fb);
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        CHECK((ff.embed(f, faces_a.values[f]) - ff.embed(f, faces_b.values[f])).norm() < 1e-6);
    }
}

TEST_CASE("angular error")
{
    RosyField a, b;
    a.N = b.N = 4;
    a.values.resize(5);
    b.values.resize(5);
    a.values << Complex(1, 0), Complex(0, 1), std::polar(2.0, pi / 4), Complex(0, 0), std::polar(1.0, 0.1);
    b.values << Complex(3, 0), Complex(1, 0), Complex(1, 0), Complex(1, 0), std::polar(1.0, -0.1);
    const AngularError e = angular_error(a, b);
    CHECK(std::abs(e.per_element[0]) < 1e-15);
    CHECK(std::abs(e.per_element[1]) < 1e-15);
    CHECK(std::abs(e.per_element[2] - pi / 4) < 1e-15);
    CHECK(std::abs(e.per_element[3]) < 1e-15);
    CHECK(std::abs(e.per_element[4] - 0.2) < 1e-15);
    CHECK(std::abs(e.max - pi / 4) < 1e-15);
    CHECK(std::abs(e.median - 0.0) < 1e-15);
    CHECK(std::abs(e.mean - (pi / 4 + 0.2) / 5) < 1e-15);

    // Pseudometric on random fields: symmetric, bounded, triangle inequality.
    for (int N : {1, 2, 4}) {
        RosyField x, y, z;
        x.N = y.N = z.N = N;
        x.values = random_vector(300, 10);
        y.values = random_vector(300, 11);
        z.values = random_vector(300, 12);
        const auto xy = angular_error(x, y).per_element;
        const auto yx = angular_error(y, x).per_element;
        const auto yz = angular_error(y, z).per_element;
        const auto xz = angular_error(x, z).per_element;
        CHECK((xy - yx).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(xy.maxCoeff() <= pi / N + 1e-15);
        CHECK(xy.minCoeff() >= 0.0);
        CHECK((xz.array() <= xy.array() + yz.array() + 1e-12).all());
        CHECK(angular_error(x, x).max == 0.0);
    }

    RosyField c = b;
    c.N = 2;
    CHECK_THROWS_AS(angular_error(a, c), ValidationError);
    c = b;
    c.domain = Domain::faces;
    CHECK_THROWS_AS(angular_error(a, c), ValidationError);
}

TEST_CASE("cross field export")
{
    const SurfaceMesh mesh = shapes::grid(2, 2, 1.0, 1.0);
    const FaceFrames ff(mesh);
    RosyField f;
    f.N = 4;
    f.domain = Domain::faces;
    f.values = random_vector(mesh.num_faces(), 6);
    const auto path = scratch("out.cross");
    export_cross_field(f, mesh, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "VHNCROSS 1");
    std::getline(in, line);
    CHECK(line == "N 4");
    std::getline(in, line);
    CHECK(line == "count " + std::to_string(mesh.num_faces()));
    for (Index fi = 0; fi < mesh.num_faces(); ++fi) {
        long index;
        in >> index;
        CHECK(index == fi);
        std::vector<Vec3> dirs(4);
        for (auto& d : dirs) in >> d.x() >> d.y() >> d.z();
        for (int k = 0; k < 4; ++k) {
            CHECK((dirs[static_cast<std::size_t>(k)] - ff.embed(fi, f.values[fi] * std::polar(1.0, k * pi / 2))).norm() < 1e-14);
            CHECK(std::abs(dirs[static_cast<std::size_t>(k)].dot(dirs[static_cast<std::size_t>((k + 1) % 4)])) < 1e-14);
        }
    }
    RosyField v = f;
    v.domain = Domain::vertices;
    CHECK_THROWS_AS(export_cross_field(v, mesh, path), ValidationError);
    std::filesystem::remove_all(path.parent_path());
}
