#include <vhn/error.hpp>
#include <vhn/features.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vhn {

Index FeatureSpec::num_channels() const
{
    Index c = hks_channels;
    if (gaussian_curvature_gradient) ++c;
    if (mean_curvature_gradient) ++c;
    if (principal_directions) ++c;
    return rotate_concat ? 2 * c : c;
}

std::string FeatureSpec::describe() const
{
    std::ostringstream out;
    out << "hks_grad=" << hks_channels << ";gc_grad=" << gaussian_curvature_gradient
        << ";mc_grad=" << mean_curvature_gradient << ";pcd=" << principal_directions << ";normalize=" << normalize
        << ";rotate_concat=" << rotate_concat << ";scalar_k=" << scalar_k;
    return out.str();
}

void FeatureSpec::validate() const
{
    if (hks_channels < 0) throw ValidationError("features: hks_channels must be >= 0");
    if (hks_channels == 0 && !gaussian_curvature_gradient && !mean_curvature_gradient && !principal_directions) {
        throw ValidationError("features: no channel selected");
    }
    if (scalar_k < 2) throw ValidationError("features: scalar_k must be >= 2");
}

void to_json(nlohmann::json& j, const FeatureSpec& s)
{
    j = nlohmann::json{{"hks_channels", s.hks_channels},
                       {"gaussian_curvature_gradient", s.gaussian_curvature_gradient},
                       {"mean_curvature_gradient", s.mean_curvature_gradient},
                       {"principal_directions", s.principal_directions},
                       {"normalize", s.normalize},
                       {"rotate_concat", s.rotate_concat},
                       {"scalar_k", s.scalar_k}};
}

void from_json(const nlohmann::json& j, FeatureSpec& s)
{
    static const char* known[] = {"hks_channels", "gaussian_curvature_gradient", "mean_curvature_gradient",
                                  "principal_directions", "normalize", "rotate_concat", "scalar_k"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("features: unknown key '" + key + "'");
        }
    }
    s.hks_channels = j.value("hks_channels", s.hks_channels);
    s.gaussian_curvature_gradient = j.value("gaussian_curvature_gradient", s.gaussian_curvature_gradient);
    s.mean_curvature_gradient = j.value("mean_curvature_gradient", s.mean_curvature_gradient);
    s.principal_directions = j.value("principal_directions", s.principal_directions);
    s.normalize = j.value("normalize", s.normalize);
    s.rotate_concat = j.value("rotate_concat", s.rotate_concat);
    s.scalar_k = j.value("scalar_k", s.scalar_k);
    s.validate();
}

Eigen::VectorXd default_hks_times(const ScalarBasis& basis, int count)
{
    if (basis.size() < 2) throw ValidationError("HKS needs at least two eigenpairs");
    const double lambda_2 = basis.lambda[1];
    const double lambda_k = basis.lambda[basis.size() - 1];
    if (!(lambda_2 > 1e-10 * lambda_k)) {
        throw ValidationError("HKS: second eigenvalue is zero (is the mesh disconnected?)");
    }
    const double lo = std::log(4.0 * std::log(10.0) / lambda_k);
    const double hi = std::log(4.0 * std::log(10.0) / lambda_2);
    Eigen::VectorXd t(count);
    for (int i = 0; i < count; ++i) {
        const double a = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        t[i] = std::exp(lo + a * (hi - lo));
    }
    return t;
}

Eigen::MatrixXd hks_scalar(const ScalarBasis& basis, const Eigen::VectorXd& times)
{
    if (basis.size() < 2) throw ValidationError("HKS needs at least two eigenpairs");
    if (!(basis.lambda[1] > 1e-10 * basis.lambda[basis.size() - 1])) {
        throw ValidationError("HKS: second eigenvalue is zero (is the mesh disconnected?)");
    }
    const Eigen::MatrixXd sq = basis.phi.cwiseAbs2();
    Eigen::MatrixXd decay(basis.size(), times.size());
    for (Eigen::Index j = 0; j < times.size(); ++j) {
        decay.col(j) = (-basis.lambda.array() * times[j]).exp().matrix();
    }
    return sq * decay;
}

VectorXc gradient_feature(
    const SurfaceMesh& mesh,
    const FaceFrames& face_frames,
    const VertexToFaceTransport& transport,
    const Eigen::VectorXd& scalar)
{
    const VectorXc g = face_gradient(mesh, face_frames, scalar);
    VectorXc sum = VectorXc::Zero(mesh.num_vertices());
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        const double a = mesh.face_area(f);
        const Triangle& t = mesh.face(f);
        for (int c = 0; c < 3; ++c) {
            const Index v = t[static_cast<std::size_t>(c)];
            sum[v] += a * std::conj(transport.rotation(f, c)) * g[f];
            weight[v] += a;
        }
    }
    return sum.cwiseQuotient(weight.cast<Complex>());
}

CurvatureFeatures curvature_features(const SurfaceMesh& mesh, const IntrinsicFrame& frame)
{
    const Index n = mesh.num_vertices();
    CurvatureFeatures out;
    out.gaussian.resize(n);
    out.mean.resize(n);
    out.pcd.resize(n);

    const SparseMatrixR L = assemble_scalar_laplacian(mesh);
    const Eigen::MatrixXd Lx = L * Eigen::MatrixXd(mesh.positions());

    for (Index v = 0; v < n; ++v) {
        const double area = mesh.vertex_area(v);
        const double flat = mesh.is_boundary_vertex(v) ? std::numbers::pi : 2.0 * std::numbers::pi;
        out.gaussian[v] = (flat - mesh.angle_sum(v)) / area;

        const Vec3 hn = Lx.row(v).transpose();
        const double sign = hn.dot(mesh.vertex_normal(v)) >= 0.0 ? 1.0 : -1.0;
        out.mean[v] = mesh.is_boundary_vertex(v) ? 0.0 : sign * 0.5 * hn.norm() / area;

        // Quadric z = a x^2 + b x y + c y^2 over the one ring, in the vertex frame.
        const auto ring = mesh.outgoing(v);
        Eigen::MatrixXd A(static_cast<Eigen::Index>(ring.size()), 3);
        Eigen::VectorXd z(static_cast<Eigen::Index>(ring.size()));
        const Vec3 p = mesh.position(v);
        const Vec3 nrm = frame.normal(v);
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const Vec3 d = mesh.position(mesh.to_vertex(ring[k])) - p;
            const double x = d.dot(frame.e0(v));
            const double y = d.dot(frame.e1(v));
            const auto r = static_cast<Eigen::Index>(k);
            A(r, 0) = x * x;
            A(r, 1) = x * y;
            A(r, 2) = y * y;
            z[r] = d.dot(nrm);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (A.rows() < 3 || sv[2] <= 1e-8 * sv[0]) {
            out.pcd[v] = 0.0;
            out.rank_deficient.push_back(v);
            continue;
        }
        const Eigen::Vector3d q = svd.solve(z);
        Eigen::Matrix2d shape;
        shape << 2.0 * q[0], q[1], q[1], 2.0 * q[2];
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(shape);
        const double k_max = es.eigenvalues()[1];
        const double k_min = es.eigenvalues()[0];
        const Eigen::Vector2d dir = es.eigenvectors().col(1);
        double theta = std::atan2(dir.y(), dir.x());
        if (theta < 0.0) theta += std::numbers::pi;
        if (theta >= std::numbers::pi) theta -= std::numbers::pi;
        out.pcd[v] = std::polar(k_max - k_min, theta);
    }
    if (!out.rank_deficient.empty()) {
        spdlog::warn("curvature_features: quadric fit rank-deficient at {} vertices; principal direction set to 0",
                     out.rank_deficient.size());
    }
    return out;
}

FeatureField normalize_and_augment(
    const FeatureField& features,
    const MassMatrix& M,
    double length_scale,
    bool normalize,
    bool rotate_concat,
    const Tolerances& tol)
{
    if (features.values.rows() != M.size()) {
        throw ValidationError("normalize_and_augment: feature rows do not match the mass matrix");
    }
    FeatureField out;
    out.description = features.description;
    MatrixXc v = features.values;
    if (normalize) {
        const double total = M.total_area();
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            const double mean = M.areas.dot(v.col(j).cwiseAbs()) / total;
            if (mean < tol.degenerate_channel * length_scale) continue;
            v.col(j) /= mean;
        }
    }
    if (rotate_concat) {
        out.values.resize(v.rows(), 2 * v.cols());
        out.values << v, v * Complex(0.0, 1.0);
    } else {
        out.values = std::move(v);
    }
    return out;
}

} // namespace vhn
