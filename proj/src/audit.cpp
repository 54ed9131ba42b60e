#include <vhn/audit.hpp>
#include <vhn/error.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace vhn {

namespace {

constexpr double rad_to_deg = 180.0 / std::numbers::pi;

void compare(AuditReport& r, const Eigen::MatrixXd& ref, const Eigen::MatrixXd& other)
{
    const Eigen::VectorXd diff = (ref - other).rowwise().norm();
    const double scale = ref.rowwise().norm().maxCoeff();
    r.max_abs = std::max(r.max_abs, diff.maxCoeff());
    r.mean_abs += diff.mean();
    r.max_rel = std::max(r.max_rel, scale > 0.0 ? diff.maxCoeff() / scale : diff.maxCoeff());
}

void compare_angles(AuditReport& r, const VectorXc& a, const VectorXc& b, int N)
{
    const AngularError e = angular_error(RosyField{a, N, Domain::vertices, {}}, RosyField{b, N, Domain::vertices, {}});
    r.mean_angle_deg += e.mean * rad_to_deg;
    r.max_angle_deg = std::max(r.max_angle_deg, e.max * rad_to_deg);
}

Eigen::MatrixXd as_pairs(const VectorXc& z)
{
    Eigen::MatrixXd out(z.size(), 2);
    out.col(0) = z.real();
    out.col(1) = z.imag();
    return out;
}

int rosy_order(const Checkpoint& c) { return c.metadata.is_object() ? c.metadata.value("rosy_order", 4) : 4; }

} // namespace

Eigen::Matrix3d random_rotation(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    const double w = d(rng), x = d(rng), y = d(rng), z = d(rng);
    return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

AuditReport audit_basis(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const BundleOptions& options,
    int trials,
    std::uint64_t seed,
    double threshold)
{
    if (trials < 1) throw ValidationError("audit_basis: need at least one trial");
    AuditReport r;
    r.which = "basis";
    r.threshold = threshold;
    r.trials = trials;
    const int N = rosy_order(checkpoint);

    const MeshBundle ref = build_bundle(mesh, options);
    const VectorXc ref_out = infer(checkpoint, ref).col(0);
    const Positions ref_vec = embed_vertex_field(ref, ref_out);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (int t = 0; t < trials; ++t) {
        BundleOptions rotated = options;
        rotated.frame.basis_rotation.resize(static_cast<std::size_t>(mesh.num_vertices()));
        for (double& phi : rotated.frame.basis_rotation) phi = angle(rng);
        const MeshBundle b = build_bundle(mesh, rotated);
        const VectorXc out = infer(checkpoint, b).col(0);
        compare(r, ref_vec, embed_vertex_field(b, out));
        // Bring the rotated-frame coefficients back to the reference frames for the angle measure.
        VectorXc back(out.size());
        for (Index v = 0; v < mesh.num_vertices(); ++v) back[v] = ref.frame.express(v, b.frame.embed(v, out[v]));
        compare_angles(r, ref_out, back, N);
    }
    r.mean_abs /= trials;
    r.mean_angle_deg /= trials;
    r.passed = r.max_rel <= threshold;
    return r;
}

AuditReport audit_rigid(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const BundleOptions& options,
    const Eigen::Matrix3d& rotation,
    const Vec3& translation,
    double threshold)
{
    AuditReport r;
    r.which = "rigid";
    r.threshold = threshold;
    r.trials = 1;
    const MeshBundle a = build_bundle(mesh, options);
    const MeshBundle b = build_bundle(transformed(mesh, rotation, translation), options);
    const VectorXc oa = infer(checkpoint, a).col(0);
    const VectorXc ob = infer(checkpoint, b).col(0);
    compare(r, as_pairs(oa), as_pairs(ob));
    compare_angles(r, oa, ob, rosy_order(checkpoint));
    r.passed = r.max_rel <= threshold;
    return r;
}

AuditReport audit_isometry(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const SurfaceMesh& isometric,
    const BundleOptions& options,
    double threshold)
{
    if (mesh.num_vertices() != isometric.num_vertices() || mesh.faces() != isometric.faces()) {
        throw ValidationError("audit_isometry: the two meshes must share connectivity");
    }
    AuditReport r;
    r.which = "isometry";
    r.threshold = threshold;
    r.trials = 1;
    const MeshBundle a = build_bundle(mesh, options);
    const MeshBundle b = build_bundle(isometric, options);
    const VectorXc oa = infer(checkpoint, a).col(0);
    const VectorXc ob = infer(checkpoint, b).col(0);
    compare(r, as_pairs(oa), as_pairs(ob));
    compare_angles(r, oa, ob, rosy_order(checkpoint));
    r.passed = r.max_rel <= threshold;
    return r;
}

Eigen::Vector3d closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {1.0 - v - w, v, w};
}

VectorXc transfer_field(const MeshBundle& source, const VectorXc& field, const MeshBundle& target, int N)
{
    if (field.size() != source.mesh.num_vertices()) throw ValidationError("transfer_field: size mismatch");
    const SurfaceMesh& sm = source.mesh;
    VectorXc out(target.mesh.num_vertices());
    for (Index v = 0; v < target.mesh.num_vertices(); ++v) {
        const Vec3 p = target.mesh.position(v);
        double best = std::numeric_limits<double>::infinity();
        Index best_face = 0;
        Eigen::Vector3d best_w(1.0, 0.0, 0.0);
        for (Index f = 0; f < sm.num_faces(); ++f) {
            const Triangle& t = sm.face(f);
            const Vec3 a = sm.position(t[0]), b = sm.position(t[1]), c = sm.position(t[2]);
            const Eigen::Vector3d w = closest_point_barycentric(p, a, b, c);
            const double d = (w[0] * a + w[1] * b + w[2] * c - p).squaredNorm();
            if (d < best) {
                best = d;
                best_face = f;
                best_w = w;
            }
        }
        const Triangle& t = sm.face(best_face);
        Complex power = 0.0;
        for (int c = 0; c < 3; ++c) {
            const Index sv = t[static_cast<std::size_t>(c)];
            const Complex z = target.frame.express(v, source.frame.embed(sv, field[sv]));
            power += best_w[c] * std::pow(z, N);
        }
        out[v] = canonical_root(power, N);
    }
    return out;
}

AuditReport audit_remesh(
    const Checkpoint& checkpoint,
    const SurfaceMesh& source,
    const SurfaceMesh& target,
    const BundleOptions& options,
    int N,
    double threshold_deg)
{
    AuditReport r;
    r.which = "remesh";
    r.threshold = threshold_deg;
    r.trials = 1;
    const MeshBundle a = build_bundle(source, options);
    const MeshBundle b = build_bundle(target, options);
    const VectorXc oa = infer(checkpoint, a).col(0);
    const VectorXc ob = infer(checkpoint, b).col(0);
    const VectorXc moved = transfer_field(a, oa, b, N);

    const Positions pa = embed_vertex_field(b, moved);
    const Positions pb = embed_vertex_field(b, ob);
    compare(r, pb, pa);
    compare_angles(r, ob, moved, N);
    r.passed = r.mean_angle_deg < threshold_deg;
    return r;
}

} // namespace vhn
