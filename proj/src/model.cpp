#include <vhn/binary_io.hpp>
#include <vhn/error.hpp>
#include <vhn/model.hpp>
#include <vhn/simd/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace vhn {

namespace {

constexpr std::string_view checkpoint_magic = "VHNCKPT1";
constexpr std::uint32_t checkpoint_version = 1;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

LinearLayer make_layer(int fan_in, int fan_out, std::mt19937_64& rng)
{
    LinearLayer l;
    l.weight.resize(fan_in, fan_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = bound * (2.0 * unit_uniform(rng) - 1.0);
    }
    l.bias = Eigen::VectorXd::Zero(fan_out);
    return l;
}

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void check_layer(const LinearLayer& l, Eigen::Index in, Eigen::Index out, const std::string& name)
{
    if (l.weight.rows() != in || l.weight.cols() != out || l.bias.size() != out) {
        throw ValidationError(name + ": expected " + std::to_string(in) + "x" + std::to_string(out) + " weights, got " +
                              std::to_string(l.weight.rows()) + "x" + std::to_string(l.weight.cols()));
    }
}

void check_params(const VhnParams& p, const VhnConfig& c)
{
    check_layer(p.input, c.in_channels, c.hidden_channels, "input layer");
    if (static_cast<int>(p.blocks.size()) != c.num_blocks) throw ValidationError("parameter block count does not match config");
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const auto& blk = p.blocks[b];
        const std::string name = "block " + std::to_string(b);
        if (blk.log_time.size() != c.diffusion_times) throw ValidationError(name + ": wrong number of diffusion times");
        check_layer(blk.first, static_cast<Eigen::Index>(c.diffusion_times) * c.hidden_channels, c.hidden_channels,
                    name + " first layer");
        check_layer(blk.second, c.hidden_channels, c.hidden_channels, name + " second layer");
    }
    check_layer(p.output, c.hidden_channels, c.out_channels, "output layer");
}

} // namespace

void VhnConfig::validate() const
{
    if (num_blocks < 0) throw ValidationError("num_blocks must be >= 0");
    if (hidden_channels < 1 || diffusion_times < 1 || k < 1 || in_channels < 1 || out_channels < 1) {
        throw ValidationError("model channel counts, diffusion_times and k must all be >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const VhnConfig& c)
{
    j = nlohmann::json{{"num_blocks", c.num_blocks},       {"hidden_channels", c.hidden_channels},
                       {"diffusion_times", c.diffusion_times}, {"k", c.k},
                       {"in_channels", c.in_channels},     {"out_channels", c.out_channels},
                       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, VhnConfig& c)
{
    static const char* known[] = {"num_blocks", "hidden_channels", "diffusion_times", "k",
                                  "in_channels", "out_channels", "dropout"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("model config: unknown key '" + key + "'");
        }
    }
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    c.hidden_channels = j.value("hidden_channels", c.hidden_channels);
    c.diffusion_times = j.value("diffusion_times", c.diffusion_times);
    c.k = j.value("k", c.k);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.dropout = j.value("dropout", c.dropout);
    c.validate();
}

Eigen::VectorXd VhnParams::diffusion_times(std::size_t block) const
{
    return blocks[block].log_time.array().exp() * t_scale;
}

std::vector<ParamView> parameter_views(VhnParams& p)
{
    std::vector<ParamView> out;
    out.push_back({"input.weight", span_of(p.input.weight), ParamKind::weight});
    out.push_back({"input.bias", span_of(p.input.bias), ParamKind::bias});
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        auto& blk = p.blocks[b];
        const std::string pre = "block" + std::to_string(b) + ".";
        out.push_back({pre + "log_time", span_of(blk.log_time), ParamKind::log_time});
        out.push_back({pre + "first.weight", span_of(blk.first.weight), ParamKind::weight});
        out.push_back({pre + "first.bias", span_of(blk.first.bias), ParamKind::bias});
        out.push_back({pre + "second.weight", span_of(blk.second.weight), ParamKind::weight});
        out.push_back({pre + "second.bias", span_of(blk.second.bias), ParamKind::bias});
    }
    out.push_back({"output.weight", span_of(p.output.weight), ParamKind::weight});
    out.push_back({"output.bias", span_of(p.output.bias), ParamKind::bias});
    return out;
}

std::size_t count_parameters(const VhnConfig& c)
{
    const std::size_t cin = static_cast<std::size_t>(c.in_channels);
    const std::size_t h = static_cast<std::size_t>(c.hidden_channels);
    const std::size_t m = static_cast<std::size_t>(c.diffusion_times);
    const std::size_t out = static_cast<std::size_t>(c.out_channels);
    const std::size_t block = m + (m * h * h + h) + (h * h + h);
    return (cin * h + h) + static_cast<std::size_t>(c.num_blocks) * block + (h * out + out);
}

std::size_t count_parameters(const VhnParams& params)
{
    std::size_t n = 0;
    for (const auto& v : parameter_views(const_cast<VhnParams&>(params))) n += v.values.size();
    return n;
}

VhnParams init_params(const VhnConfig& c, double t_scale, std::uint64_t seed)
{
    c.validate();
    if (!(t_scale > 0.0) || !std::isfinite(t_scale)) throw ValidationError("t_scale must be positive");
    std::mt19937_64 rng(seed);
    VhnParams p;
    p.t_scale = t_scale;
    p.input = make_layer(c.in_channels, c.hidden_channels, rng);
    for (int b = 0; b < c.num_blocks; ++b) {
        BlockParams blk;
        blk.log_time.resize(c.diffusion_times);
        for (int i = 0; i < c.diffusion_times; ++i) blk.log_time[i] = -2.0 + 4.0 * unit_uniform(rng);
        blk.first = make_layer(c.diffusion_times * c.hidden_channels, c.hidden_channels, rng);
        blk.second = make_layer(c.hidden_channels, c.hidden_channels, rng);
        p.blocks.push_back(std::move(blk));
    }
    p.output = make_layer(c.hidden_channels, c.out_channels, rng);
    return p;
}

VhnParams zeros_like(const VhnParams& params)
{
    VhnParams z = params;
    for (auto& v : parameter_views(z)) std::fill(v.values.begin(), v.values.end(), 0.0);
    return z;
}

MatrixXc vector_layer(const LinearLayer& layer, const MatrixXc& input, double guard)
{
    return simd::magnitude_relu(simd::apply_real_weights(input, layer.weight), layer.bias, guard);
}

Eigen::ArrayXXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed, std::uint64_t stream)
{
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    const double keep = 1.0 / (1.0 - p);
    Eigen::ArrayXXd mask(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = unit_uniform(rng) < p ? 0.0 : keep;
    }
    return mask;
}

MatrixXc vector_mlp(
    std::span<const LinearLayer> layers,
    const MatrixXc& input,
    double dropout,
    Mode mode,
    std::uint64_t seed,
    std::uint64_t stream)
{
    MatrixXc x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (x.cols() != layers[l].weight.rows()) {
            throw ValidationError("vector_mlp: layer " + std::to_string(l) + " expects " +
                                  std::to_string(layers[l].weight.rows()) + " channels, got " + std::to_string(x.cols()));
        }
        if (l > 0 && mode == Mode::train && dropout > 0.0) {
            x.array() *= dropout_mask(x.rows(), x.cols(), dropout, seed, stream + l).cast<Complex>();
        }
        x = vector_layer(layers[l], x);
    }
    return x;
}

MatrixXc forward(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const MatrixXc& features,
    Mode mode,
    std::uint64_t seed,
    ForwardTape* tape)
{
    config.validate();
    check_params(params, config);
    const Eigen::Index n = features.rows();
    if (features.cols() != config.in_channels) {
        throw ValidationError("forward: features have " + std::to_string(features.cols()) + " channels, model expects " +
                              std::to_string(config.in_channels));
    }
    if (basis.num_vertices() != n || M.size() != n) {
        throw ValidationError("forward: basis, mass matrix and features disagree on the vertex count");
    }
    if (basis.size() != config.k) {
        throw ValidationError("forward: basis has " + std::to_string(basis.size()) + " modes, model expects k = " +
                              std::to_string(config.k));
    }
    const double guard = default_tolerances().magnitude_guard;
    const bool drop = mode == Mode::train && config.dropout > 0.0;
    const Eigen::Index c = config.hidden_channels;
    const int m = config.diffusion_times;

    if (tape) {
        tape->features = features;
        tape->blocks.clear();
    }
    MatrixXc pre = simd::apply_real_weights(features, params.input.weight);
    MatrixXc x = simd::magnitude_relu(pre, params.input.bias, guard);
    if (tape) tape->pre_in = std::move(pre);

    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        const BlockParams& blk = params.blocks[b];
        const Eigen::VectorXd s = params.diffusion_times(b);

        const MatrixXc coeffs = simd::project(basis.phi, M.areas.asDiagonal() * x);
        MatrixXc scaled(coeffs.rows(), m * c);
        for (int i = 0; i < m; ++i) {
            const Eigen::ArrayXd decay = (-basis.lambda.array() * s[i]).exp();
            scaled.middleCols(i * c, c) = decay.cast<Complex>().matrix().asDiagonal() * coeffs;
        }
        // [Y_1 .. Y_m] W = Phi ([D_1 C .. D_m C] W) since W is real.
        MatrixXc pre1 = simd::expand(basis.phi, simd::apply_real_weights(scaled, blk.first.weight));
        MatrixXc hidden = simd::magnitude_relu(pre1, blk.first.bias, guard);
        Eigen::ArrayXXd mask;
        if (drop) {
            mask = dropout_mask(hidden.rows(), hidden.cols(), config.dropout, seed, b);
            hidden.array() *= mask.cast<Complex>();
        }
        MatrixXc pre2 = simd::apply_real_weights(hidden, blk.second.weight);
        MatrixXc update = simd::magnitude_relu(pre2, blk.second.bias, guard);

        if (tape) {
            BlockTape t;
            t.x_in = x;
            t.coeffs = coeffs;
            t.spectral = std::move(scaled);
            t.pre1 = std::move(pre1);
            t.dropped = std::move(hidden);
            t.mask = std::move(mask);
            t.pre2 = std::move(pre2);
            tape->blocks.push_back(std::move(t));
        }
        x += update;
    }

    MatrixXc pre_out = simd::apply_real_weights(x, params.output.weight);
    MatrixXc out = simd::magnitude_relu(pre_out, params.output.bias, guard);
    if (tape) {
        tape->x_out = std::move(x);
        tape->pre_out = std::move(pre_out);
    }
    return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path)
{
    checkpoint.config.validate();
    check_params(checkpoint.params, checkpoint.config);
    nlohmann::json header = checkpoint.metadata;
    header["config"] = checkpoint.config;
    header["param_count"] = count_parameters(checkpoint.config);
    header["t_scale"] = checkpoint.params.t_scale;

    PayloadWriter w;
    w.put(checkpoint.params.t_scale);
    for (const auto& v : parameter_views(const_cast<VhnParams&>(checkpoint.params))) {
        w.put(std::span<const double>(v.values.data(), v.values.size()));
    }
    write_container(path, checkpoint_magic, Container{checkpoint_version, header.dump(), w.bytes()});
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    const Container c = read_container(path, checkpoint_magic, checkpoint_version);
    Checkpoint out;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(c.header);
        out.config = header.at("config").get<VhnConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path.string() + "': malformed checkpoint header: " + e.what());
    }
    const std::size_t expected = count_parameters(out.config);
    if (header.value("param_count", std::size_t{0}) != expected) {
        throw ValidationError("'" + path.string() + "': parameter count does not match its config");
    }
    out.params = init_params(out.config, 1.0, 0);
    PayloadReader r(c.payload);
    out.params.t_scale = r.get_f64();
    for (auto& v : parameter_views(out.params)) r.get(v.values);
    if (!r.at_end()) throw ValidationError("'" + path.string() + "': trailing data after parameters");
    header.erase("config");
    header.erase("param_count");
    header.erase("t_scale");
    out.metadata = std::move(header);
    return out;
}

} // namespace vhn
