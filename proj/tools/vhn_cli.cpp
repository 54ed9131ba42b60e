// vhn: batch front-end (precompute, features, train, eval, infer, export, audit).
//
// Results go to stdout as tab-separated lines; logs go to stderr as
// "<time>\t<level>\t<message>". Exit codes: 0 ok, 1 validation, 2 numerical, 3 I/O.

#include <vhn/audit.hpp>
#include <vhn/error.hpp>
#include <vhn/pipeline.hpp>
#include <vhn/rosy.hpp>
#include <vhn/run_config.hpp>
#include <vhn/simd/kernels.hpp>
#include <vhn/training.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vhn;

namespace {

struct Flags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache;
    std::string out;
    std::optional<long> k;
    std::optional<int> rosy;
    std::optional<double> threshold;
    std::string checkpoint;
    std::vector<std::string> meshes;
    std::string pair;
    std::string which = "basis";
    std::string field;
    int trials = 20;
    bool operators = false;
};

std::optional<RunConfig> maybe_config(const Flags& f)
{
    if (f.config.empty()) return std::nullopt;
    return load_run_config(f.config);
}

fs::path cache_dir(const Flags& f, const std::optional<RunConfig>& rc)
{
    std::optional<fs::path> flag;
    if (f.cache) flag = *f.cache;
    return resolve_cache_dir(flag, rc ? rc->cache_dir : fs::path{});
}

fs::path out_dir(const Flags& f, const std::optional<RunConfig>& rc)
{
    if (!f.out.empty()) return f.out;
    if (rc && !rc->out_dir.empty()) return rc->out_dir;
    return ".";
}

std::vector<DatasetEntry> dataset(const Flags& f, const std::optional<RunConfig>& rc)
{
    std::vector<DatasetEntry> out;
    for (const auto& m : f.meshes) out.push_back({m, f.field});
    if (out.empty() && rc) out = rc->meshes;
    if (out.empty()) throw ValidationError("no meshes given (use --mesh or a config with \"meshes\")");
    return out;
}

BundleOptions options_from(const FeatureSpec& features, Index k)
{
    BundleOptions o;
    o.k = k;
    o.features = features;
    return o;
}

BundleOptions options_from_config(const Flags& f, const std::optional<RunConfig>& rc)
{
    RunConfig defaults;
    const RunConfig& c = rc ? *rc : defaults;
    return options_from(c.features, f.k ? static_cast<Index>(*f.k) : c.model.k);
}

BundleOptions options_from_checkpoint(const Checkpoint& ckpt)
{
    FeatureSpec spec;
    if (ckpt.metadata.contains("features")) spec = ckpt.metadata.at("features").get<FeatureSpec>();
    if (spec.num_channels() != ckpt.config.in_channels) {
        throw ValidationError("checkpoint feature spec yields " + std::to_string(spec.num_channels()) +
                              " channels but the model expects " + std::to_string(ckpt.config.in_channels));
    }
    return options_from(spec, ckpt.config.k);
}

int checkpoint_rosy(const Flags& f, const Checkpoint& ckpt)
{
    const int N = ckpt.metadata.value("rosy_order", 4);
    if (f.rosy && *f.rosy != N) {
        throw ValidationError("--rosy " + std::to_string(*f.rosy) + " does not match the checkpoint's N = " + std::to_string(N));
    }
    return N;
}

std::string stem(const fs::path& p) { return p.stem().string(); }

RosyField load_ground_truth(const fs::path& path, const MeshBundle& b, int N)
{
    RosyField gt = import_field(path);
    if (gt.domain != Domain::vertices) throw ValidationError("ground truth '" + path.string() + "' is not a vertex field");
    if (gt.values.size() != b.mesh.num_vertices()) {
        throw ValidationError("ground truth '" + path.string() + "' has " + std::to_string(gt.values.size()) +
                              " values for " + std::to_string(b.mesh.num_vertices()) + " vertices");
    }
    if (!gt.frame_hash.empty() && gt.frame_hash != b.mesh_hash) {
        throw ValidationError("ground truth '" + path.string() + "' refers to a different mesh (hash mismatch)");
    }
    if (gt.N != N) throw ValidationError("ground truth '" + path.string() + "' has N = " + std::to_string(gt.N));
    return gt;
}

int cmd_precompute(const Flags& f)
{
    const auto rc = maybe_config(f);
    const fs::path cache = cache_dir(f, rc);
    if (cache.empty()) throw ValidationError("precompute needs a cache directory (--cache, VHN_CACHE or cache_dir)");
    const BundleOptions options = options_from_config(f, rc);
    int rebuilt = 0;
    int status = 0;
    for (const auto& entry : dataset(f, rc)) {
        try {
            CacheStatus st;
            const MeshBundle b = load_or_build_bundle(load_obj(entry.mesh), options, cache, &st);
            if (st.rebuilt) ++rebuilt;
            spdlog::info("mesh={}\tvertices={}\thash={}\tstatus={}\tentry={}", entry.mesh.string(), b.mesh.num_vertices(),
                         b.mesh_hash, st.rebuilt ? "rebuilt:" + st.reason : std::string("fresh"), st.path.string());
        } catch (const Error& e) {
            spdlog::error("mesh={}\t{}", entry.mesh.string(), e.what());
            if (status == 0) status = e.exit_code();
        }
    }
    std::cout << rebuilt << " rebuilt\n";
    return status;
}

int cmd_features(const Flags& f)
{
    const auto rc = maybe_config(f);
    const BundleOptions options = options_from_config(f, rc);
    const fs::path out = out_dir(f, rc);
    for (const auto& entry : dataset(f, rc)) {
        const MeshBundle b = load_or_build_bundle(load_obj(entry.mesh), options, cache_dir(f, rc));
        for (Index c = 0; c < b.features.num_channels(); ++c) {
            const fs::path path = out / stem(entry.mesh) / ("feature_" + std::to_string(c) + ".field");
            export_field(RosyField{b.features.values.col(c), 1, Domain::vertices, b.mesh_hash}, b.mesh, b.frame, path);
        }
        std::cout << entry.mesh.string() << '\t' << b.features.num_channels() << '\t' << b.features.description << '\n';
    }
    return 0;
}

int cmd_train(const Flags& f)
{
    if (f.config.empty()) throw ValidationError("train needs --config");
    RunConfig rc = *maybe_config(f);
    if (f.seed) rc.seed = *f.seed;
    if (f.k) rc.model.k = static_cast<Index>(*f.k);
    if (f.rosy) rc.train.rosy_order = *f.rosy;
    rc.train.seed = rc.seed;
    rc.model.validate();
    rc.train.validate();
    const BundleOptions options = options_from(rc.features, rc.model.k);
    const fs::path cache = cache_dir(f, rc);

    std::vector<MeshBundle> bundles;
    std::vector<MatrixXc> gts;
    nlohmann::json hashes = nlohmann::json::array();
    for (const auto& entry : rc.meshes) {
        if (entry.field.empty()) throw ValidationError("train: mesh '" + entry.mesh.string() + "' has no ground-truth field");
        bundles.push_back(load_or_build_bundle(load_obj(entry.mesh), options, cache));
        gts.push_back(load_ground_truth(entry.field, bundles.back(), rc.train.rosy_order).values);
        hashes.push_back(bundles.back().mesh_hash);
    }
    if (bundles.empty()) throw ValidationError("train: config lists no meshes");

    std::vector<TrainingSample> samples;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        samples.push_back({stem(rc.meshes[i].mesh), &bundles[i].basis, &bundles[i].mass, bundles[i].features.values, gts[i]});
    }
    const double t_scale = default_time_scale(bundles.front().mesh);
    const VhnParams params = init_params(rc.model, t_scale, rc.seed);

    TrainOptions to;
    to.checkpoint_dir = out_dir(f, rc);
    to.metadata = {{"features", rc.features}, {"rosy_order", rc.train.rosy_order}, {"train", rc.train},
                   {"seed", rc.seed}, {"mesh_hashes", hashes}};
    to.on_epoch = [](const EpochLog& e) { spdlog::info("epoch\t{}", format_epoch_log(e)); };
    const TrainResult r = train(samples, rc.train, rc.model, params, to);
    std::cout << "best_epoch\t" << r.best_epoch << "\tbest_loss\t" << r.best_loss << '\n';
    return 0;
}

int cmd_eval(const Flags& f)
{
    if (f.checkpoint.empty()) throw ValidationError("eval needs --checkpoint");
    const auto rc = maybe_config(f);
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    const int N = checkpoint_rosy(f, ckpt);
    const BundleOptions options = options_from_checkpoint(ckpt);

    std::ostringstream table;
    table << "mesh\ttotal\tmagnitude\tdirection\tmasked\tangle_mean_deg\tangle_median_deg\tangle_max_deg\n";
    table.precision(10);
    for (const auto& entry : dataset(f, rc)) {
        if (entry.field.empty()) throw ValidationError("eval: mesh '" + entry.mesh.string() + "' has no ground-truth field");
        const MeshBundle b = load_or_build_bundle(load_obj(entry.mesh), options, cache_dir(f, rc));
        const RosyField gt = load_ground_truth(entry.field, b, N);
        const MatrixXc pred = infer(ckpt, b);
        const LossBreakdown loss = rosy_loss(pred, gt.values, b.mass, N);
        const AngularError ang = angular_error(RosyField{pred.col(0), N, Domain::vertices, b.mesh_hash}, gt);
        constexpr double deg = 180.0 / 3.14159265358979323846;
        table << entry.mesh.string() << '\t' << loss.total << '\t' << loss.magnitude << '\t' << loss.direction << '\t'
              << loss.masked << '\t' << ang.mean * deg << '\t' << ang.median * deg << '\t' << ang.max * deg << '\n';
    }
    std::cout << table.str();
    if (!f.out.empty()) {
        fs::create_directories(f.out);
        std::ofstream file(fs::path(f.out) / "eval.tsv");
        if (!(file << table.str())) throw IoError("cannot write eval.tsv");
    }
    return 0;
}

int cmd_infer(const Flags& f)
{
    if (f.checkpoint.empty()) throw ValidationError("infer needs --checkpoint");
    const auto rc = maybe_config(f);
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    const int N = checkpoint_rosy(f, ckpt);
    const BundleOptions options = options_from_checkpoint(ckpt);
    const fs::path out = out_dir(f, rc);
    for (const auto& entry : dataset(f, rc)) {
        const MeshBundle b = load_or_build_bundle(load_obj(entry.mesh), options, cache_dir(f, rc));
        const RosyField vertex{infer(ckpt, b).col(0), N, Domain::vertices, b.mesh_hash};
        const RosyField face = rosy_to_faces(b.transport, vertex);
        const fs::path vpath = out / (stem(entry.mesh) + ".vertex.field");
        const fs::path fpath = out / (stem(entry.mesh) + ".face.field");
        export_field(vertex, b.mesh, b.frame, vpath);
        export_field(face, b.mesh, b.frame, fpath);
        std::cout << entry.mesh.string() << '\t' << vpath.string() << '\t' << fpath.string() << '\n';
    }
    return 0;
}

int cmd_export(const Flags& f)
{
    const auto rc = maybe_config(f);
    const fs::path out = out_dir(f, rc);
    std::optional<Checkpoint> ckpt;
    BundleOptions options = options_from_config(f, rc);
    if (!f.checkpoint.empty()) {
        ckpt = load_checkpoint(f.checkpoint);
        options = options_from_checkpoint(*ckpt);
    } else if (f.field.empty() && !f.operators) {
        throw ValidationError("export needs --checkpoint, --field or --operators");
    }
    for (const auto& entry : dataset(f, rc)) {
        const std::string name = stem(entry.mesh);
        if (f.operators) {
            const SurfaceMesh mesh = load_obj(entry.mesh);
            const IntrinsicFrame frame = build_frames(mesh);
            write_matrix_market(assemble_connection_laplacian(mesh, frame).matrix, out / (name + ".connection.mtx"));
            write_matrix_market(assemble_mass_matrix(mesh), out / (name + ".mass.mtx"));
            write_matrix_market(assemble_scalar_laplacian(mesh), out / (name + ".cotan.mtx"));
            std::cout << entry.mesh.string() << "\toperators\t" << out.string() << '\n';
            if (!ckpt && entry.field.empty()) continue;
        }
        RosyField vertex;
        SurfaceMesh mesh = load_obj(entry.mesh);
        if (ckpt) {
            const MeshBundle b = load_or_build_bundle(std::move(mesh), options, cache_dir(f, rc));
            vertex = RosyField{infer(*ckpt, b).col(0), checkpoint_rosy(f, *ckpt), Domain::vertices, b.mesh_hash};
            const RosyField face = rosy_to_faces(b.transport, vertex);
            export_cross_field(face, b.mesh, out / (name + ".cross"));
        } else {
            vertex = import_field(entry.field);
            const IntrinsicFrame frame = build_frames(mesh);
            const FaceFrames ff(mesh);
            if (vertex.values.size() != mesh.num_vertices()) throw ValidationError("field does not match mesh '" + entry.mesh.string() + "'");
            const RosyField face = rosy_to_faces(build_vertex_to_face_transport(mesh, frame, ff), vertex);
            export_cross_field(face, mesh, out / (name + ".cross"));
        }
        std::cout << entry.mesh.string() << "\tcross\t" << (out / (name + ".cross")).string() << '\n';
    }
    return 0;
}

int cmd_audit(const Flags& f)
{
    if (f.checkpoint.empty()) throw ValidationError("audit needs --checkpoint");
    if (f.meshes.size() != 1) throw ValidationError("audit needs exactly one --mesh");
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    const int N = checkpoint_rosy(f, ckpt);
    const BundleOptions options = options_from_checkpoint(ckpt);
    const SurfaceMesh mesh = load_obj(f.meshes.front());
    const std::uint64_t seed = f.seed.value_or(0);

    AuditReport r;
    if (f.which == "basis") {
        r = audit_basis(ckpt, mesh, options, f.trials, seed, f.threshold.value_or(1e-5));
    } else if (f.which == "rigid") {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        const Vec3 t(d(rng), d(rng), d(rng));
        r = audit_rigid(ckpt, mesh, options, random_rotation(seed), t, f.threshold.value_or(1e-6));
    } else if (f.which == "isometry" || f.which == "remesh") {
        if (f.pair.empty()) throw ValidationError("audit --which " + f.which + " needs --pair");
        const SurfaceMesh other = load_obj(f.pair);
        r = f.which == "isometry" ? audit_isometry(ckpt, mesh, other, options, f.threshold.value_or(1e-4))
                                  : audit_remesh(ckpt, mesh, other, options, N, f.threshold.value_or(10.0));
    } else {
        throw ValidationError("unknown audit '" + f.which + "' (basis|rigid|isometry|remesh)");
    }
    std::cout << "which\t" << r.which << "\ttrials\t" << r.trials << "\tmax_abs\t" << r.max_abs << "\tmean_abs\t"
              << r.mean_abs << "\tmax_rel\t" << r.max_rel << "\tmean_angle_deg\t" << r.mean_angle_deg
              << "\tmax_angle_deg\t" << r.max_angle_deg << "\tthreshold\t" << r.threshold << "\tresult\t"
              << (r.passed ? "pass" : "fail") << '\n';
    return r.passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    auto logger = spdlog::stderr_color_mt("vhn");
    logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e\t%l\t%v");
    spdlog::set_default_logger(logger);

    CLI::App app{"Vector heat network: intrinsic learning of tangent vector fields on triangle meshes"};
    app.require_subcommand(1);
    Flags f;
    std::string simd;
    app.add_option("--simd", simd, "Kernel variant (scalar|avx2)");
    app.fallthrough();

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "Run configuration (JSON)");
        sub->add_option("--seed", f.seed, "Random seed");
        sub->add_option("--cache", f.cache, "Cache directory (overrides VHN_CACHE)");
        sub->add_option("--out", f.out, "Output directory");
        sub->add_option("--k", f.k, "Number of connection-Laplacian modes");
        sub->add_option("--rosy", f.rosy, "Rotational symmetry order N");
        sub->add_option("--mesh", f.meshes, "Mesh file (OBJ); repeatable");
    };
    auto* pre = app.add_subcommand("precompute", "Cache frames, operators, eigenbases and features");
    common(pre);
    auto* feat = app.add_subcommand("features", "Write input feature channels as field files");
    common(feat);
    auto* tr = app.add_subcommand("train", "Train a network on the configured dataset");
    common(tr);
    auto* ev = app.add_subcommand("eval", "Loss and angular error against ground-truth fields");
    common(ev);
    ev->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    ev->add_option("--field", f.field, "Ground-truth vertex field for --mesh");
    auto* inf = app.add_subcommand("infer", "Predict vertex and face fields");
    common(inf);
    inf->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    auto* ex = app.add_subcommand("export", "Per-face cross fields and operator matrices");
    common(ex);
    ex->add_option("--checkpoint", f.checkpoint, "Checkpoint file");
    ex->add_option("--field", f.field, "Vertex field file for --mesh");
    ex->add_flag("--operators", f.operators, "Also write Matrix Market operators");
    auto* au = app.add_subcommand("audit", "Invariance audits");
    common(au);
    au->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    au->add_option("--which", f.which, "basis|rigid|isometry|remesh")->check(CLI::IsMember({"basis", "rigid", "isometry", "remesh"}));
    au->add_option("--pair", f.pair, "Second mesh for isometry and remesh audits");
    au->add_option("--threshold", f.threshold, "Pass threshold (relative, or degrees for remesh)");
    au->add_option("--trials", f.trials, "Basis-rotation trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!simd.empty()) {
            if (simd == "scalar") simd::set_active_isa(simd::Isa::scalar);
            else if (simd == "avx2") simd::set_active_isa(simd::Isa::avx2);
            else throw ValidationError("unknown --simd '" + simd + "'");
        }
        if (pre->parsed()) return cmd_precompute(f);
        if (feat->parsed()) return cmd_features(f);
        if (tr->parsed()) return cmd_train(f);
        if (ev->parsed()) return cmd_eval(f);
        if (inf->parsed()) return cmd_infer(f);
        if (ex->parsed()) return cmd_export(f);
        if (au->parsed()) return cmd_audit(f);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 1;
}
