#pragma once

#include <vhn/features.hpp>
#include <vhn/frame.hpp>
#include <vhn/model.hpp>
#include <vhn/operators.hpp>
#include <vhn/spectral.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace vhn {

struct BundleOptions
{
    /// Connection-Laplacian modes. Must not exceed the vertex count.
    Index k = 128;
    FeatureSpec features;
    FrameOptions frame;
    EigenOptions eigen;
};

/// Everything the network needs for one mesh.
struct MeshBundle
{
    SurfaceMesh mesh;
    std::string mesh_hash;
    IntrinsicFrame frame;
    FaceFrames face_frames;
    VertexToFaceTransport transport;
    ConnectionLaplacian laplacian;
    MassMatrix mass;
    SpectralBasis basis;
    ScalarBasis scalar_basis;
    FeatureField features;
};

/// Generate the configured feature channels from a bundle's frames and scalar basis.
FeatureField compute_features(const MeshBundle& bundle, const FeatureSpec& spec);

MeshBundle build_bundle(SurfaceMesh mesh, const BundleOptions& options);

/// Cache key: hash of the mesh content hash and every option that affects cached data.
std::string bundle_key(const std::string& mesh_hash, const BundleOptions& options);

struct CacheStatus
{
    bool rebuilt = false;
    std::string reason; ///< why the entry was rebuilt ("missing", "corrupt: ...", "stale")
    std::filesystem::path path;
};

///
/// Bundle with eigenbases and features taken from `cache_dir` when a fresh
/// entry exists; otherwise computed and stored. Frames and sparse operators
/// are always rebuilt (cheap and deterministic). A cache directory of ""
/// disables caching.
///
MeshBundle load_or_build_bundle(
    SurfaceMesh mesh,
    const BundleOptions& options,
    const std::filesystem::path& cache_dir,
    CacheStatus* status = nullptr);

/// Network output for a bundle (eval mode).
MatrixXc infer(const Checkpoint& checkpoint, const MeshBundle& bundle);

/// Output column 0 as embedded 3D vectors in the bundle's vertex frames.
Positions embed_vertex_field(const MeshBundle& bundle, const VectorXc& field);

/// Square of the mean edge length: the diffusion time unit fixed at model initialization.
double default_time_scale(const SurfaceMesh& mesh);

} // namespace vhn
