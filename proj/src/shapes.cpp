#include <vhn/error.hpp>
#include <vhn/shapes.hpp>

#include <cmath>
#include <map>
#include <numbers>

namespace vhn::shapes {

namespace {

SurfaceMesh from_lists(const std::vector<Vec3>& points, std::vector<Triangle> faces)
{
    Positions p(static_cast<Eigen::Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    return SurfaceMesh(std::move(p), std::move(faces));
}

} // namespace

SurfaceMesh icosahedron() { return icosphere(0); }

SurfaceMesh icosphere(int subdivisions)
{
    if (subdivisions < 0) throw ValidationError("icosphere: negative subdivision count");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : v) p.normalize();
    std::vector<Triangle> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<Index, Index>, Index> midpoint;
        auto mid = [&](Index a, Index b) {
            const auto key = std::minmax(a, b);
            auto [it, inserted] = midpoint.try_emplace({key.first, key.second}, static_cast<Index>(v.size()));
            if (inserted) v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
            return it->second;
        };
        std::vector<Triangle> next;
        next.reserve(4 * f.size());
        for (const auto& [a, b, c] : f) {
            const Index ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    return from_lists(v, std::move(f));
}

SurfaceMesh scaled(const SurfaceMesh& mesh, const Vec3& s)
{
    Positions p = mesh.positions();
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = p.row(i).cwiseProduct(s.transpose());
    return SurfaceMesh(std::move(p), mesh.faces());
}

namespace {

std::vector<Triangle> grid_faces(int nx, int ny, bool alternate)
{
    std::vector<Triangle> f;
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Index a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if (alternate && (i + j) % 2 == 1) {
                f.push_back({a, b, d});
                f.push_back({b, c, d});
            } else {
                f.push_back({a, b, c});
                f.push_back({a, c, d});
            }
        }
    }
    return f;
}

} // namespace

SurfaceMesh grid(int nx, int ny, double width, double height, bool alternate)
{
    if (nx < 1 || ny < 1) throw ValidationError("grid: need at least one cell per direction");
    std::vector<Vec3> v;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) v.emplace_back(width * i / nx, height * j / ny, 0.0);
    }
    return from_lists(v, grid_faces(nx, ny, alternate));
}

SurfaceMesh bent_grid(int nx, int ny, double width, double height, double total_angle)
{
    if (nx < 1 || ny < 1) throw ValidationError("bent_grid: need at least one cell per direction");
    const double dx = width / nx;
    std::vector<double> cx(static_cast<std::size_t>(nx + 1), 0.0);
    std::vector<double> cz(static_cast<std::size_t>(nx + 1), 0.0);
    for (int i = 0; i < nx; ++i) {
        const double turn = total_angle * (i + 0.5) / nx;
        cx[static_cast<std::size_t>(i + 1)] = cx[static_cast<std::size_t>(i)] + dx * std::cos(turn);
        cz[static_cast<std::size_t>(i + 1)] = cz[static_cast<std::size_t>(i)] + dx * std::sin(turn);
    }
    std::vector<Vec3> v;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            v.emplace_back(cx[static_cast<std::size_t>(i)], height * j / ny, cz[static_cast<std::size_t>(i)]);
        }
    }
    return from_lists(v, grid_faces(nx, ny, false));
}

SurfaceMesh subdivided_cube(int n)
{
    if (n < 1) throw ValidationError("subdivided_cube: n must be positive");
    std::map<std::array<int, 3>, Index> ids;
    std::vector<Vec3> v;
    auto vertex = [&](const std::array<int, 3>& lattice) {
        auto [it, inserted] = ids.try_emplace(lattice, static_cast<Index>(v.size()));
        if (inserted) {
            v.emplace_back(2.0 * lattice[0] / n - 1.0, 2.0 * lattice[1] / n - 1.0, 2.0 * lattice[2] / n - 1.0);
        }
        return it->second;
    };
    // (fixed axis, fixed at max?, u axis, v axis) with u x v along the outward normal.
    struct Side { int axis; bool high; int u; int v; };
    const Side sides[6] = {{0, true, 1, 2}, {0, false, 2, 1}, {1, true, 2, 0},
                           {1, false, 0, 2}, {2, true, 0, 1}, {2, false, 1, 0}};
    std::vector<Triangle> f;
    for (const Side& s : sides) {
        auto at = [&](int i, int j) {
            std::array<int, 3> p{};
            p[static_cast<std::size_t>(s.axis)] = s.high ? n : 0;
            p[static_cast<std::size_t>(s.u)] = i;
            p[static_cast<std::size_t>(s.v)] = j;
            return vertex(p);
        };
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const Index a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
                f.push_back({a, b, c});
                f.push_back({a, c, d});
            }
        }
    }
    return from_lists(v, std::move(f));
}

SurfaceMesh pyramid_cone(int sides, double slope)
{
    if (sides < 3) throw ValidationError("pyramid_cone: need at least three sides");
    std::vector<Vec3> v{Vec3::Zero()};
    std::vector<Vec3> rays;
    for (int k = 0; k < sides; ++k) {
        const double a = 2.0 * std::numbers::pi * k / sides;
        rays.push_back(Vec3(std::cos(a), std::sin(a), -slope).normalized());
    }
    for (const Vec3& r : rays) v.push_back(r);
    for (const Vec3& r : rays) v.push_back(2.0 * r);
    std::vector<Triangle> f;
    auto r1 = [sides](int k) { return 1 + k % sides; };
    auto r2 = [sides](int k) { return 1 + sides + k % sides; };
    for (int k = 0; k < sides; ++k) {
        f.push_back({0, r1(k), r1(k + 1)});
        f.push_back({r1(k), r2(k), r2(k + 1)});
        f.push_back({r1(k), r2(k + 1), r1(k + 1)});
    }
    return from_lists(v, std::move(f));
}

} // namespace vhn::shapes
