#include "oracles.hpp"

#include <vhn/audit.hpp>
#include <vhn/error.hpp>
#include <vhn/model.hpp>
#include <vhn/pipeline.hpp>
#include <vhn/shapes.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace vhn;

namespace {

VhnConfig tiny(int in_channels, Index k)
{
    VhnConfig c;
    c.num_blocks = 2;
    c.hidden_channels = 4;
    c.diffusion_times = 2;
    c.k = k;
    c.in_channels = in_channels;
    c.dropout = 0.0;
    return c;
}

BundleOptions small_options(Index k)
{
    BundleOptions o;
    o.k = k;
    o.features.hks_channels = 3;
    o.features.scalar_k = 42;
    return o;
}

// Nonzero biases so the nonlinearity is active.
void randomize_biases(VhnParams& p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 0.3);
    for (auto& v : parameter_views(p)) {
        if (v.kind == ParamKind::bias)
            for (double& x : v.values) x = d(rng);
    }
}

} // namespace

TEST_CASE("default configuration")
{
    const VhnConfig c;
    CHECK(c.num_blocks == 6);
    CHECK(c.hidden_channels == 256);
    CHECK(c.diffusion_times == 4);
    CHECK(c.k == 128);
    CHECK(c.in_channels == 30);
    CHECK(c.out_channels == 1);
    CHECK(c.dropout == 0.5);
    nlohmann::json j = c;
    j["extra"] = 1;
    CHECK_THROWS_AS(j.get<VhnConfig>(), ValidationError);
    VhnConfig bad;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = VhnConfig{};
    bad.hidden_channels = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("parameter count matches the enumerated records")
{
    for (int blocks : {0, 1, 2, 6}) {
        for (int m : {1, 2, 4}) {
            VhnConfig c;
            c.in_channels = 30;
            c.hidden_channels = 4;
            c.diffusion_times = m;
            c.num_blocks = blocks;
            std::size_t total = 0;
            for (const auto& r : oracle::enumerate_parameters(c)) total += r.rows * r.cols;
            CHECK(count_parameters(c) == total);
            VhnParams p = init_params(c, 1.0, 1);
            CHECK(count_parameters(p) == total);
            const auto views = parameter_views(p);
            const auto records = oracle::enumerate_parameters(c);
            REQUIRE(views.size() == records.size());
            for (std::size_t i = 0; i < views.size(); ++i) {
                CHECK(views[i].values.size() == records[i].rows * records[i].cols);
                CHECK(views[i].name.find(records[i].name) != std::string::npos);
            }
        }
    }
    VhnConfig c;
    c.in_channels = 30;
    c.hidden_channels = 4;
    c.diffusion_times = 2;
    c.num_blocks = 1;
    CHECK(count_parameters(c) == 30 * 4 + 4 + (2 + 8 * 4 + 4 + 16 + 4) + 4 + 1);
    VhnConfig twice = c;
    twice.diffusion_times = 4;
    // doubling m adds m log-times and m*c*c first-layer weights
    CHECK(count_parameters(twice) - count_parameters(c) == 2 + 2 * 4 * 4);
}

TEST_CASE("initialization")
{
    VhnConfig c;
    c.hidden_channels = 16;
    VhnParams p = init_params(c, 0.25, 9);
    CHECK(p.t_scale == 0.25);
    for (const auto& v : parameter_views(p)) {
        if (v.kind == ParamKind::bias) {
            for (double x : v.values) CHECK(x == 0.0);
        } else if (v.kind == ParamKind::log_time) {
            for (double x : v.values) CHECK((x >= -2.0 && x <= 2.0));
        }
    }
    const double bound = 1.0 / std::sqrt(16.0 * 4.0);
    CHECK(p.blocks[0].first.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(p.blocks[0].first.weight.cwiseAbs().maxCoeff() > 0.5 * bound);
    const Eigen::VectorXd s = p.diffusion_times(0);
    CHECK((s.array() > 0.0).all());
    CHECK(std::abs(s[0] - std::exp(p.blocks[0].log_time[0]) * 0.25) < 1e-15);
    CHECK(init_params(c, 0.25, 9).blocks[3].second.weight == p.blocks[3].second.weight);
    CHECK(init_params(c, 0.25, 10).blocks[3].second.weight != p.blocks[3].second.weight);
    CHECK_THROWS_AS(init_params(c, 0.0, 1), ValidationError);
}

TEST_CASE("vector layer")
{
    LinearLayer id{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
    MatrixXc z(2, 3);
    z << Complex(2, 0), Complex(0, 0.5), Complex(-1, 1), Complex(0.3, 0.4), Complex(0, 0), Complex(5, -2);
    CHECK(vector_layer(id, z) == z);

    LinearLayer soft{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(3)};
    const MatrixXc y = vector_layer(soft, z);
    CHECK(std::abs(y(0, 0) - Complex(1, 0)) < 1e-15);
    CHECK(y(0, 1) == Complex(0, 0));
    CHECK(y(1, 1) == Complex(0, 0));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        CHECK(std::abs(y.data()[i]) <= std::abs(z.data()[i]));
        if (std::abs(y.data()[i]) > 0) CHECK(std::abs(std::arg(y.data()[i] / z.data()[i])) < 1e-15);
    }
    LinearLayer wrong{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)};
    const LinearLayer layers[] = {wrong};
    CHECK_THROWS_AS(vector_mlp(layers, z, 0.0, Mode::eval, 0), ValidationError);
}

TEST_CASE("dropout masks")
{
    const Eigen::ArrayXXd a = dropout_mask(200, 50, 0.5, 7, 3);
    const Eigen::ArrayXXd b = dropout_mask(200, 50, 0.5, 7, 3);
    const Eigen::ArrayXXd c = dropout_mask(200, 50, 0.5, 7, 4);
    CHECK((a == b).all());
    CHECK_FALSE((a == c).all());
    const double dropped = (a == 0.0).cast<double>().mean();
    CHECK(std::abs(dropped - 0.5) < 0.03);
    CHECK(((a == 0.0) || (a == 2.0)).all());

    const LinearLayer layers[] = {{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)},
                                  {Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)}};
    const MatrixXc x = oracle::random_complex(30, 4, 1);
    CHECK(vector_mlp(layers, x, 0.5, Mode::eval, 3) == x);
    const MatrixXc t = vector_mlp(layers, x, 0.5, Mode::train, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool zero = t.data()[i] == Complex(0.0);
        const bool scaled = std::abs(t.data()[i] - 2.0 * x.data()[i]) < 1e-14;
        CHECK((zero || scaled));
    }
}

TEST_CASE("forward pass properties")
{
    const MeshBundle b = build_bundle(shapes::scaled(shapes::icosphere(1), Vec3(1.0, 0.75, 0.5)), small_options(20));
    const VhnConfig c = tiny(static_cast<int>(b.features.num_channels()), 20);
    VhnParams p = init_params(c, default_time_scale(b.mesh), 5);
    randomize_biases(p, 6);

    const MatrixXc zero = MatrixXc::Zero(b.mesh.num_vertices(), c.in_channels);
    CHECK(forward(p, c, b.basis, b.mass, zero, Mode::eval, 0).cwiseAbs().maxCoeff() == 0.0);

    const MatrixXc y = forward(p, c, b.basis, b.mass, b.features.values, Mode::eval, 0);
    CHECK(y.rows() == b.mesh.num_vertices());
    CHECK(y.cols() == 1);
    CHECK(y.cwiseAbs().maxCoeff() > 0.0);
    CHECK(forward(p, c, b.basis, b.mass, b.features.values, Mode::eval, 99) == y);

    const Complex phase = std::polar(1.0, 0.77);
    const MatrixXc yp = forward(p, c, b.basis, b.mass, phase * b.features.values, Mode::eval, 0);
    CHECK((yp - phase * y).cwiseAbs().maxCoeff() < 1e-8 * y.cwiseAbs().maxCoeff());

    ForwardTape tape;
    const MatrixXc yt = forward(p, c, b.basis, b.mass, b.features.values, Mode::eval, 0, &tape);
    CHECK(yt == y);
    CHECK(tape.blocks.size() == 2);
    CHECK(tape.blocks[0].spectral.rows() == b.basis.size());
    CHECK(tape.blocks[0].spectral.cols() == 8);

    VhnConfig wrong_k = c;
    wrong_k.k = 19;
    CHECK_THROWS_AS(forward(init_params(wrong_k, 1.0, 1), wrong_k, b.basis, b.mass, b.features.values, Mode::eval, 0),
                    ValidationError);
    CHECK_THROWS_AS(forward(p, c, b.basis, b.mass, b.features.values.leftCols(2), Mode::eval, 0), ValidationError);
}

TEST_CASE("train-mode dropout is seeded")
{
    const MeshBundle b = build_bundle(shapes::icosphere(1), small_options(16));
    VhnConfig c = tiny(static_cast<int>(b.features.num_channels()), 16);
    c.dropout = 0.5;
    const VhnParams p = init_params(c, default_time_scale(b.mesh), 2);
    const MatrixXc a = forward(p, c, b.basis, b.mass, b.features.values, Mode::train, 1);
    CHECK(a == forward(p, c, b.basis, b.mass, b.features.values, Mode::train, 1));
    CHECK(a != forward(p, c, b.basis, b.mass, b.features.values, Mode::train, 2));
    CHECK(a != forward(p, c, b.basis, b.mass, b.features.values, Mode::eval, 1));
}

TEST_CASE("default model on the 642-vertex icosphere")
{
    BundleOptions o;
    const MeshBundle b = build_bundle(shapes::scaled(shapes::icosphere(3), Vec3(1.0, 0.75, 0.5)), o);
    const VhnConfig c;
    CHECK(b.features.num_channels() == 30);
    const VhnParams p = init_params(c, default_time_scale(b.mesh), 0);
    const MatrixXc y = forward(p, c, b.basis, b.mass, b.features.values, Mode::eval, 0);
    CHECK(y.rows() == 642);
    CHECK(y.cols() == 1);
    CHECK(y.allFinite());
}

TEST_CASE("checkpoints")
{
    const VhnConfig c = tiny(6, 10);
    Checkpoint ck{c, init_params(c, 0.125, 4), {{"rosy_order", 4}, {"note", "x"}}};
    randomize_biases(ck.params, 1);
    const auto dir = std::filesystem::temp_directory_path() / "vhn_test_ckpt";
    const auto path = dir / "a.ckpt";
    save_checkpoint(ck, path);
    const Checkpoint r = load_checkpoint(path);
    CHECK(r.params.t_scale == 0.125);
    CHECK(r.metadata == ck.metadata);
    auto va = parameter_views(ck.params);
    auto vb = parameter_views(const_cast<Checkpoint&>(r).params);
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(std::equal(va[i].values.begin(), va[i].values.end(), vb[i].values.begin()));
    CHECK(nlohmann::json(r.config) == nlohmann::json(c));

    // flip one payload byte
    std::filesystem::copy_file(path, dir / "b.ckpt");
    {
        std::fstream f(dir / "b.ckpt", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-64, std::ios::end);
        f.put('\x01');
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "b.ckpt"), ValidationError);
    {
        std::ofstream f(dir / "c.ckpt", std::ios::binary);
        f << "not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "c.ckpt"), ValidationError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
    VhnParams bad = ck.params;
    bad.blocks.pop_back();
    CHECK_THROWS_AS(save_checkpoint(Checkpoint{c, bad, {}}, dir / "d.ckpt"), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("end-to-end invariances")
{
    const SurfaceMesh mesh = shapes::scaled(shapes::icosphere(1), Vec3(1.0, 0.75, 0.5));
    const BundleOptions o = small_options(20);
    const VhnConfig c = tiny(static_cast<int>(o.features.num_channels()), 20);
    VhnParams p = init_params(c, default_time_scale(mesh), 8);
    randomize_biases(p, 9);
    const Checkpoint ck{c, p, {{"rosy_order", 4}}};

    const AuditReport basis = audit_basis(ck, mesh, o, 5, 1);
    CHECK(basis.max_rel < 1e-5);
    const AuditReport rigid = audit_rigid(ck, mesh, o, random_rotation(3), Vec3(4.0, 0.5, -1.0));
    CHECK(rigid.max_rel < 1e-6);

    // Full basis on the sheet, so no eigenvalue cluster is cut.
    const SurfaceMesh sheet = shapes::grid(6, 4, 1.5, 1.0);
    BundleOptions so = small_options(sheet.num_vertices());
    so.features.scalar_k = sheet.num_vertices();
    VhnConfig sc = c;
    sc.k = sheet.num_vertices();
    VhnParams sp = init_params(sc, default_time_scale(sheet), 10);
    randomize_biases(sp, 11);
    const AuditReport iso = audit_isometry({sc, sp, {{"rosy_order", 4}}}, sheet, shapes::bent_grid(6, 4, 1.5, 1.0, 2.0), so);
    CHECK(iso.max_rel < 1e-4);
}
