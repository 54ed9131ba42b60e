#pragma once

#include <vhn/pipeline.hpp>
#include <vhn/rosy.hpp>

#include <cstdint>
#include <string>

namespace vhn {

struct AuditReport
{
    std::string which;
    int trials = 0;
    /// Largest and mean per-vertex discrepancy |a - b| of the compared vectors.
    double max_abs = 0.0;
    double mean_abs = 0.0;
    /// max_abs / max |reference|.
    double max_rel = 0.0;
    /// N-Rosy angular error between the compared fields, degrees.
    double mean_angle_deg = 0.0;
    double max_angle_deg = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

/// Random per-vertex basis rotations; compares embedded 3D output vectors.
/// Passes when max_rel <= threshold.
AuditReport audit_basis(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const BundleOptions& options,
    int trials,
    std::uint64_t seed,
    double threshold = 1e-5);

/// Rigidly moved copy; compares output coefficients. Passes when max_rel <= threshold.
AuditReport audit_rigid(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const BundleOptions& options,
    const Eigen::Matrix3d& rotation,
    const Vec3& translation,
    double threshold = 1e-6);

/// Two meshes with identical connectivity (and edge lengths); compares output coefficients.
AuditReport audit_isometry(
    const Checkpoint& checkpoint,
    const SurfaceMesh& mesh,
    const SurfaceMesh& isometric,
    const BundleOptions& options,
    double threshold = 1e-4);

///
/// For every target vertex, the nearest point on the source surface; the three
/// source corner vectors are embedded, projected into the target vertex frame,
/// raised to the N-th power and blended barycentrically. Passes when the mean
/// N-Rosy angular error against the target's own output is below
/// `threshold_deg`.
///
AuditReport audit_remesh(
    const Checkpoint& checkpoint,
    const SurfaceMesh& source,
    const SurfaceMesh& target,
    const BundleOptions& options,
    int N,
    double threshold_deg = 10.0);

/// Uniformly distributed rotation (normalized Gaussian quaternion).
Eigen::Matrix3d random_rotation(std::uint64_t seed);

/// Closest point on triangle abc to p, as barycentric weights.
Eigen::Vector3d closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Transfer a vertex N-Rosy field from `source` onto the vertices of `target`
/// by nearest surface point (see audit_remesh).
VectorXc transfer_field(const MeshBundle& source, const VectorXc& field, const MeshBundle& target, int N);

} // namespace vhn
