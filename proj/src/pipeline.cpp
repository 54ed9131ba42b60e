#include <vhn/binary_io.hpp>
#include <vhn/error.hpp>
#include <vhn/hash.hpp>
#include <vhn/pipeline.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace vhn {

namespace {

constexpr std::string_view cache_magic = "VHNCACHE";
constexpr std::uint32_t cache_version = 1;

MeshBundle geometry_only(SurfaceMesh mesh, const BundleOptions& options)
{
    std::string hash = content_hash(mesh);
    IntrinsicFrame frame = build_frames(mesh, options.frame);
    FaceFrames face_frames(mesh);
    VertexToFaceTransport transport = build_vertex_to_face_transport(mesh, frame, face_frames);
    ConnectionLaplacian L = assemble_connection_laplacian(mesh, frame);
    MassMatrix M = assemble_mass_matrix(mesh);
    return MeshBundle{std::move(mesh), std::move(hash), std::move(frame), std::move(face_frames), std::move(transport),
                      std::move(L), std::move(M), {}, {}, {}};
}

void fill_spectral(MeshBundle& b, const BundleOptions& options)
{
    b.basis = solve_eigenbasis(b.laplacian.matrix, b.mass, options.k, options.eigen);
    b.scalar_basis = solve_eigenbasis(assemble_scalar_laplacian(b.mesh), b.mass, options.features.scalar_k, options.eigen);
    b.features = compute_features(b, options.features);
}

} // namespace

FeatureField compute_features(const MeshBundle& bundle, const FeatureSpec& spec)
{
    const Index n = bundle.mesh.num_vertices();
    std::vector<VectorXc> channels;
    if (spec.hks_channels > 0) {
        const Eigen::VectorXd times = default_hks_times(bundle.scalar_basis, spec.hks_channels);
        const Eigen::MatrixXd hks = hks_scalar(bundle.scalar_basis, times);
        for (Eigen::Index j = 0; j < hks.cols(); ++j) {
            channels.push_back(gradient_feature(bundle.mesh, bundle.face_frames, bundle.transport, hks.col(j)));
        }
    }
    if (spec.gaussian_curvature_gradient || spec.mean_curvature_gradient || spec.principal_directions) {
        const CurvatureFeatures curv = curvature_features(bundle.mesh, bundle.frame);
        if (spec.gaussian_curvature_gradient) {
            channels.push_back(gradient_feature(bundle.mesh, bundle.face_frames, bundle.transport, curv.gaussian));
        }
        if (spec.mean_curvature_gradient) {
            channels.push_back(gradient_feature(bundle.mesh, bundle.face_frames, bundle.transport, curv.mean));
        }
        if (spec.principal_directions) channels.push_back(curv.pcd);
    }
    if (channels.empty()) throw ValidationError("feature spec selects no channels");
    FeatureField raw;
    raw.values.resize(n, static_cast<Eigen::Index>(channels.size()));
    for (std::size_t j = 0; j < channels.size(); ++j) raw.values.col(static_cast<Eigen::Index>(j)) = channels[j];
    raw.description = spec.describe();
    return normalize_and_augment(raw, bundle.mass, bundle.mesh.bounding_box_diagonal(), spec.normalize, spec.rotate_concat);
}

MeshBundle build_bundle(SurfaceMesh mesh, const BundleOptions& options)
{
    MeshBundle b = geometry_only(std::move(mesh), options);
    fill_spectral(b, options);
    return b;
}

std::string bundle_key(const std::string& mesh_hash, const BundleOptions& options)
{
    Sha256 h;
    h.update("vhn-bundle-v1;");
    h.update(mesh_hash);
    h.update(";k=" + std::to_string(options.k));
    h.update(";features=" + options.features.describe());
    h.update(";dense_limit=" + std::to_string(options.eigen.dense_limit));
    h.update(";block=" + std::to_string(options.eigen.block_size));
    h.update(";seed=" + std::to_string(options.eigen.seed));
    h.update(";rotation=");
    h.update(std::span<const double>(options.frame.basis_rotation));
    return h.hex_digest();
}

MeshBundle load_or_build_bundle(
    SurfaceMesh mesh,
    const BundleOptions& options,
    const std::filesystem::path& cache_dir,
    CacheStatus* status)
{
    MeshBundle b = geometry_only(std::move(mesh), options);
    CacheStatus local;
    CacheStatus& st = status ? *status : local;
    st = CacheStatus{};
    if (cache_dir.empty()) {
        fill_spectral(b, options);
        st.rebuilt = true;
        st.reason = "caching disabled";
        return b;
    }
    const std::string key = bundle_key(b.mesh_hash, options);
    st.path = cache_dir / (key + ".vhnc");

    if (std::filesystem::exists(st.path)) {
        try {
            const Container c = read_container(st.path, cache_magic, cache_version);
            const auto header = nlohmann::json::parse(c.header);
            if (header.at("key").get<std::string>() != key || header.at("mesh_hash").get<std::string>() != b.mesh_hash) {
                throw ValidationError("key mismatch");
            }
            PayloadReader r(c.payload);
            b.basis = read_spectral_basis(r);
            b.scalar_basis = read_scalar_basis(r);
            const auto rows = r.get_i64();
            const auto cols = r.get_i64();
            if (rows != b.mesh.num_vertices() || cols < 1) throw ValidationError("feature block has the wrong shape");
            b.features.values.resize(rows, cols);
            r.get(std::span<Complex>(b.features.values.data(), static_cast<std::size_t>(b.features.values.size())));
            if (!r.at_end()) throw ValidationError("trailing data");
            if (b.basis.num_vertices() != b.mesh.num_vertices() || b.basis.size() != options.k ||
                b.scalar_basis.num_vertices() != b.mesh.num_vertices()) {
                throw ValidationError("basis dimensions do not match");
            }
            b.features.description = header.at("features").get<std::string>();
            return b;
        } catch (const std::exception& e) {
            spdlog::warn("cache entry '{}' is unusable ({}); rebuilding", st.path.string(), e.what());
            st.reason = std::string("corrupt: ") + e.what();
        }
    } else {
        st.reason = "missing";
    }

    fill_spectral(b, options);
    st.rebuilt = true;

    nlohmann::json header{{"key", key},
                          {"mesh_hash", b.mesh_hash},
                          {"k", options.k},
                          {"features", b.features.description},
                          {"vertices", b.mesh.num_vertices()}};
    PayloadWriter w;
    write_basis(w, b.basis);
    write_basis(w, b.scalar_basis);
    w.put(static_cast<std::int64_t>(b.features.values.rows()));
    w.put(static_cast<std::int64_t>(b.features.values.cols()));
    w.put(std::span<const Complex>(b.features.values.data(), static_cast<std::size_t>(b.features.values.size())));
    write_container(st.path, cache_magic, Container{cache_version, header.dump(), w.bytes()});
    return b;
}

MatrixXc infer(const Checkpoint& checkpoint, const MeshBundle& bundle)
{
    return forward(checkpoint.params, checkpoint.config, bundle.basis, bundle.mass, bundle.features.values, Mode::eval, 0);
}

Positions embed_vertex_field(const MeshBundle& bundle, const VectorXc& field)
{
    if (field.size() != bundle.mesh.num_vertices()) throw ValidationError("embed_vertex_field: size mismatch");
    Positions out(field.size(), 3);
    for (Index v = 0; v < bundle.mesh.num_vertices(); ++v) out.row(v) = bundle.frame.embed(v, field[v]).transpose();
    return out;
}

double default_time_scale(const SurfaceMesh& mesh)
{
    const double l = mesh.mean_edge_length();
    return l * l;
}

} // namespace vhn
