#pragma once

#include <vhn/frame.hpp>
#include <vhn/operators.hpp>
#include <vhn/spectral.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace vhn {

/// Per-vertex tangent-vector channels (n x c complex, vertex frame coefficients).
struct FeatureField
{
    MatrixXc values;
    /// Human- and machine-readable description of how the channels were made.
    std::string description;

    Index num_channels() const { return static_cast<Index>(values.cols()); }
};

/// Which channels to generate. Defaults: 15 HKS-gradient channels,
/// per-channel normalization, pi/2-rotated copies appended (30 channels).
struct FeatureSpec
{
    int hks_channels = 15;
    bool gaussian_curvature_gradient = false;
    bool mean_curvature_gradient = false;
    bool principal_directions = false;
    bool normalize = true;
    bool rotate_concat = true;
    /// Scalar eigenbasis size used for HKS.
    Index scalar_k = 128;

    Index num_channels() const;
    std::string describe() const;
    /// Throws ValidationError when no channel is selected or scalar_k < 2.
    void validate() const;
};

void to_json(nlohmann::json& j, const FeatureSpec& s);
void from_json(const nlohmann::json& j, FeatureSpec& s);

/// 'count' times log-spaced on [4 ln 10 / lambda_k, 4 ln 10 / lambda_2].
Eigen::VectorXd default_hks_times(const ScalarBasis& basis, int count);

/// HKS(v, t) = sum_i exp(-lambda_i t) phi_i(v)^2. Throws ValidationError when
/// lambda_2 is zero (disconnected mesh) or fewer than two modes are given.
Eigen::MatrixXd hks_scalar(const ScalarBasis& basis, const Eigen::VectorXd& times);

/// Face gradients carried back to vertex frames (inverse of the vertex-to-face
/// rotation) and averaged with incident face-area weights.
VectorXc gradient_feature(
    const SurfaceMesh& mesh,
    const FaceFrames& face_frames,
    const VertexToFaceTransport& transport,
    const Eigen::VectorXd& scalar);

struct CurvatureFeatures
{
    Eigen::VectorXd gaussian;
    Eigen::VectorXd mean;
    /// Maximal principal direction as a 2-fold symmetric representative
    /// |k1 - k2| e^{i theta}, theta measured in the vertex frame.
    VectorXc pcd;
    /// Vertices whose quadric fit was rank-deficient (pcd = 0 there).
    std::vector<Index> rank_deficient;
};

CurvatureFeatures curvature_features(const SurfaceMesh& mesh, const IntrinsicFrame& frame);

/// Scale each channel to unit M-weighted mean magnitude (channels whose mean is
/// below `degenerate_channel * bbox_diagonal` are left alone) and optionally
/// append i times every channel.
FeatureField normalize_and_augment(
    const FeatureField& features,
    const MassMatrix& M,
    double length_scale,
    bool normalize,
    bool rotate_concat,
    const Tolerances& tol = default_tolerances());

} // namespace vhn
