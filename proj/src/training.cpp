#include <vhn/error.hpp>
#include <vhn/simd/kernels.hpp>
#include <vhn/training.hpp>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace vhn {

namespace {

Complex unit_power(Complex z, int N)
{
    const Complex u = z / std::abs(z);
    Complex p = 1.0;
    for (int i = 0; i < N; ++i) p *= u;
    return p;
}

} // namespace

LossBreakdown rosy_loss(const MatrixXc& pred, const MatrixXc& gt, const MassMatrix& M, int N, MatrixXc* grad, const Tolerances& tol)
{
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || pred.rows() != M.size()) {
        throw ValidationError("rosy_loss: prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                              ", ground truth " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()) +
                              ", mass matrix " + std::to_string(M.size()));
    }
    if (N < 1) throw ValidationError("rosy_loss: N must be >= 1");
    const Eigen::Index n = pred.rows();
    const Eigen::Index channels = pred.cols();
    LossBreakdown out;
    out.vertex_magnitude = Eigen::VectorXd::Zero(n);
    out.vertex_direction = Eigen::VectorXd::Zero(n);
    if (grad) *grad = MatrixXc::Zero(n, channels);

    for (Eigen::Index j = 0; j < channels; ++j) {
        double area = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(gt(i, j)) > tol.vanishing_ground_truth) area += M.areas[i];
        }
        if (!(area > 0.0)) throw ValidationError("rosy_loss: ground truth vanishes everywhere");
        double mag_sum = 0.0;
        double dir_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Complex g = gt(i, j);
            const Complex p = pred(i, j);
            const double gm = std::abs(g);
            if (!(gm > tol.vanishing_ground_truth)) {
                ++out.masked;
                continue;
            }
            const double w = M.areas[i] / area;
            const double pm = std::abs(p);
            const double mag = std::abs(gm - pm) / gm;
            double dir = 1.0;
            double sine = 0.0;
            if (pm > tol.magnitude_guard) {
                const Complex c = std::conj(unit_power(g, N)) * unit_power(p, N);
                dir = 1.0 - c.real();
                sine = c.imag();
            }
            mag_sum += w * mag;
            dir_sum += w * dir;
            out.vertex_magnitude[i] += mag / static_cast<double>(channels);
            out.vertex_direction[i] += dir / static_cast<double>(channels);
            if (grad && pm > tol.magnitude_guard) {
                const double sgn = pm > gm ? 1.0 : (pm < gm ? -1.0 : 0.0);
                const Complex d_mag = sgn / gm * (p / pm);
                const Complex d_dir = N * sine * Complex(0.0, 1.0) * p / (pm * pm);
                (*grad)(i, j) = w * (d_mag + d_dir) / static_cast<double>(channels);
            }
        }
        out.magnitude += mag_sum / static_cast<double>(channels);
        out.direction += dir_sum / static_cast<double>(channels);
    }
    if (out.masked > 0) spdlog::warn("rosy_loss: {} vanishing ground-truth entries masked out", out.masked);
    out.total = out.magnitude + out.direction;
    return out;
}

VhnParams backward(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const ForwardTape& tape,
    const MatrixXc& d_output)
{
    const double guard = default_tolerances().magnitude_guard;
    if (tape.blocks.size() != params.blocks.size() || d_output.rows() != tape.x_out.rows() ||
        d_output.cols() != config.out_channels) {
        throw ValidationError("backward: tape and output gradient do not match the model");
    }
    VhnParams g = zeros_like(params);
    const Eigen::Index c = config.hidden_channels;
    const int m = config.diffusion_times;

    MatrixXc d_pre;
    simd::magnitude_relu_backward(tape.pre_out, params.output.bias, guard, d_output, d_pre, g.output.bias);
    g.output.weight = simd::real_weight_gradient(tape.x_out, d_pre);
    MatrixXc dx = simd::apply_real_weights_transposed(d_pre, params.output.weight);

    for (std::size_t bi = params.blocks.size(); bi-- > 0;) {
        const BlockParams& blk = params.blocks[bi];
        const BlockTape& t = tape.blocks[bi];
        BlockParams& gb = g.blocks[bi];

        MatrixXc d_pre2;
        simd::magnitude_relu_backward(t.pre2, blk.second.bias, guard, dx, d_pre2, gb.second.bias);
        gb.second.weight = simd::real_weight_gradient(t.dropped, d_pre2);
        MatrixXc d_hidden = simd::apply_real_weights_transposed(d_pre2, blk.second.weight);
        if (t.mask.size() > 0) d_hidden.array() *= t.mask.cast<Complex>();

        MatrixXc d_pre1;
        simd::magnitude_relu_backward(t.pre1, blk.first.bias, guard, d_hidden, d_pre1, gb.first.bias);
        // pre1 = Phi S W with S = [D_1 C .. D_m C] and C = Phi^H M x.
        const MatrixXc d_spectral_out = simd::project(basis.phi, d_pre1);
        gb.first.weight = simd::real_weight_gradient(t.spectral, d_spectral_out);
        const MatrixXc G = simd::apply_real_weights_transposed(d_spectral_out, blk.first.weight);
        const Eigen::VectorXd s = params.diffusion_times(bi);
        MatrixXc dC = MatrixXc::Zero(t.coeffs.rows(), c);
        for (int i = 0; i < m; ++i) {
            const Eigen::ArrayXd decay = (-basis.lambda.array() * s[i]).exp();
            const auto Gi = G.middleCols(i * c, c);
            dC += decay.cast<Complex>().matrix().asDiagonal() * Gi;
            const Eigen::ArrayXd rate = -basis.lambda.array() * decay;
            const Eigen::ArrayXXd overlap = (Gi.array().conjugate() * t.coeffs.array()).real();
            const double ds = (overlap.colwise() * rate).sum();
            gb.log_time[i] = ds * s[i];
        }
        dx += M.areas.asDiagonal() * simd::expand(basis.phi, dC);
    }

    simd::magnitude_relu_backward(tape.pre_in, params.input.bias, guard, dx, d_pre, g.input.bias);
    g.input.weight = simd::real_weight_gradient(tape.features, d_pre);
    return g;
}

LossAndGradient loss_and_gradient(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const MatrixXc& features,
    const MatrixXc& gt,
    int N,
    Mode mode,
    std::uint64_t seed)
{
    ForwardTape tape;
    const MatrixXc out = forward(params, config, basis, M, features, mode, seed, &tape);
    MatrixXc d_out;
    LossAndGradient r;
    r.loss = rosy_loss(out, gt, M, N, &d_out);
    if (!std::isfinite(r.loss.total)) throw NumericalError("loss is not finite");
    r.gradient = backward(params, config, basis, M, tape, d_out);
    for (const auto& v : parameter_views(r.gradient)) {
        for (double x : v.values) {
            if (!std::isfinite(x)) throw NumericalError("non-finite gradient in parameter '" + v.name + "'");
        }
    }
    return r;
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0) || !(decay_factor > 0.0) || decay_every < 1 || epochs < 0 || !(weight_decay >= 0.0) ||
        !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw ValidationError("training config: rates must be positive and betas in [0, 1)");
    }
    if (rosy_order < 1) throw ValidationError("training config: rosy_order must be >= 1");
    if (checkpoint_every < 0) throw ValidationError("training config: checkpoint_every must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = nlohmann::json{{"learning_rate", c.learning_rate}, {"decay_factor", c.decay_factor},
                       {"decay_every", c.decay_every},     {"epochs", c.epochs},
                       {"weight_decay", c.weight_decay},   {"beta1", c.beta1},
                       {"beta2", c.beta2},                 {"epsilon", c.epsilon},
                       {"seed", c.seed},                   {"rosy_order", c.rosy_order},
                       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c)
{
    nlohmann::json defaults = c;
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw ValidationError("training config: unknown key '" + key + "'");
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.epochs = j.value("epochs", c.epochs);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.seed = j.value("seed", c.seed);
    c.rosy_order = j.value("rosy_order", c.rosy_order);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.validate();
}

double learning_rate_at(const TrainConfig& config, int epoch)
{
    return config.learning_rate * std::pow(config.decay_factor, epoch / config.decay_every);
}

AdamW::AdamW(const VhnParams& like, const TrainConfig& config)
    : m_config(config)
    , m_m(zeros_like(like))
    , m_v(zeros_like(like))
{}

void AdamW::step(VhnParams& params, const VhnParams& gradient, double lr)
{
    ++m_t;
    const double b1 = m_config.beta1;
    const double b2 = m_config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(m_t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(m_t));
    auto p = parameter_views(params);
    auto g = parameter_views(const_cast<VhnParams&>(gradient));
    auto m = parameter_views(m_m);
    auto v = parameter_views(m_v);
    for (std::size_t a = 0; a < p.size(); ++a) {
        const bool decay = p[a].kind == ParamKind::weight && m_config.weight_decay > 0.0;
        for (std::size_t i = 0; i < p[a].values.size(); ++i) {
            const double gi = g[a].values[i];
            double& mi = m[a].values[i];
            double& vi = v[a].values[i];
            mi = b1 * mi + (1.0 - b1) * gi;
            vi = b2 * vi + (1.0 - b2) * gi * gi;
            double& x = p[a].values[i];
            if (decay) x -= lr * m_config.weight_decay * x;
            x -= lr * (mi / c1) / (std::sqrt(vi / c2) + m_config.epsilon);
            // A negative magnitude bias would make the nonlinearity discontinuous at 0.
            if (p[a].kind == ParamKind::bias) x = std::max(x, 0.0);
        }
    }
}

std::string format_epoch_log(const EpochLog& e)
{
    std::ostringstream out;
    out.precision(10);
    out << e.epoch << '\t' << e.lr << '\t' << e.total << '\t' << e.magnitude << '\t' << e.direction;
    return out.str();
}

TrainResult train(
    const std::vector<TrainingSample>& samples,
    const TrainConfig& train_config,
    const VhnConfig& config,
    VhnParams params,
    const TrainOptions& options)
{
    train_config.validate();
    config.validate();
    if (samples.empty()) throw ValidationError("train: dataset is empty");
    for (const auto& s : samples) {
        if (!s.basis || !s.mass) throw ValidationError("train: sample '" + s.name + "' has no operators");
    }

    std::ofstream loss_log;
    if (!options.checkpoint_dir.empty()) {
        std::filesystem::create_directories(options.checkpoint_dir);
        loss_log.open(options.checkpoint_dir / "loss.tsv");
        if (!loss_log) throw IoError("cannot write '" + (options.checkpoint_dir / "loss.tsv").string() + "'");
        loss_log << "epoch\tlr\ttotal\tmagnitude\tdirection\n";
    }
    auto save = [&](const VhnParams& p, const char* file) {
        if (options.checkpoint_dir.empty()) return;
        save_checkpoint(Checkpoint{config, p, options.metadata}, options.checkpoint_dir / file);
    };

    TrainResult result;
    VhnParams best;
    AdamW optimizer(params, train_config);
    std::mt19937_64 shuffle_rng(train_config.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        const double lr = learning_rate_at(train_config, epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
        EpochLog log{epoch, lr, 0.0, 0.0, 0.0};
        // Epoch losses are measured before each step, so they belong to the start-of-epoch parameters.
        const VhnParams start = options.checkpoint_dir.empty() ? VhnParams{} : params;
        for (std::size_t idx : order) {
            const TrainingSample& s = samples[idx];
            const std::uint64_t step_seed = train_config.seed + 0x100000001b3ULL * static_cast<std::uint64_t>(optimizer.steps() + 1);
            LossAndGradient lg = loss_and_gradient(params, config, *s.basis, *s.mass, s.features, s.gt,
                                                   train_config.rosy_order, Mode::train, step_seed);
            if (!std::isfinite(lg.loss.total)) {
                save(params, "failed.ckpt");
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " on '" + s.name + "'");
            }
            optimizer.step(params, lg.gradient, lr);
            log.total += lg.loss.total / static_cast<double>(samples.size());
            log.magnitude += lg.loss.magnitude / static_cast<double>(samples.size());
            log.direction += lg.loss.direction / static_cast<double>(samples.size());
        }
        result.history.push_back(log);
        if (loss_log.is_open()) loss_log << format_epoch_log(log) << '\n';
        if (options.on_epoch) options.on_epoch(log);
        if (result.best_epoch < 0 || log.total < result.best_loss) {
            result.best_epoch = epoch;
            result.best_loss = log.total;
            if (!options.checkpoint_dir.empty()) best = start;
        }
        if (train_config.checkpoint_every > 0 && (epoch + 1) % train_config.checkpoint_every == 0) save(params, "last.ckpt");
    }
    if (result.best_epoch >= 0) save(best, "best.ckpt");
    save(params, "last.ckpt");
    result.params = std::move(params);
    return result;
}

} // namespace vhn
