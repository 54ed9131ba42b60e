#pragma once

#include <vhn/model.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vhn {

struct LossBreakdown
{
    double total = 0.0;
    double magnitude = 0.0;
    double direction = 0.0;
    /// Unweighted per-vertex terms (0 at masked vertices).
    Eigen::VectorXd vertex_magnitude;
    Eigen::VectorXd vertex_direction;
    /// Vertices excluded because |gt| <= vanishing_ground_truth.
    Index masked = 0;
};

///
/// sum_i (M_ii / A) [ |(|gt_i| - |pred_i|) / |gt_i|| + 1 - Re(conj(g_i^N) p_i^N) ]
/// with g^N, p^N the normalized N-th powers and A the unmasked area. Columns
/// (channels) are averaged. When `grad` is given it receives dL/dpred as
/// dL/dRe + i dL/dIm.
///
LossBreakdown rosy_loss(
    const MatrixXc& pred,
    const MatrixXc& gt,
    const MassMatrix& M,
    int N,
    MatrixXc* grad = nullptr,
    const Tolerances& tol = default_tolerances());

/// Gradients of a scalar loss with respect to every parameter, given the tape
/// of a forward pass and dL/d(output) in the same complex convention.
VhnParams backward(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const ForwardTape& tape,
    const MatrixXc& d_output);

struct LossAndGradient
{
    LossBreakdown loss;
    VhnParams gradient;
};

/// forward + rosy_loss + backward. Throws NumericalError naming the first
/// parameter with a non-finite gradient.
LossAndGradient loss_and_gradient(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const MatrixXc& features,
    const MatrixXc& gt,
    int N,
    Mode mode,
    std::uint64_t seed);

struct TrainConfig
{
    double learning_rate = 1e-4;
    double decay_factor = 0.85;
    int decay_every = 150;
    int epochs = 3000;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    int rosy_order = 4;
    /// Write `last.ckpt` every this many epochs (0: only at the end).
    int checkpoint_every = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// learning_rate * decay_factor^floor(epoch / decay_every), epochs counted from 0.
double learning_rate_at(const TrainConfig& config, int epoch);

/// Adam moments with decoupled weight decay on weight matrices only. Magnitude
/// biases are projected onto b >= 0 after every step.
class AdamW
{
public:
    AdamW(const VhnParams& like, const TrainConfig& config);
    void step(VhnParams& params, const VhnParams& gradient, double lr);
    long steps() const { return m_t; }

private:
    TrainConfig m_config;
    VhnParams m_m;
    VhnParams m_v;
    long m_t = 0;
};

struct TrainingSample
{
    std::string name;
    const SpectralBasis* basis = nullptr;
    const MassMatrix* mass = nullptr;
    MatrixXc features;
    MatrixXc gt;
};

struct EpochLog
{
    int epoch = 0;
    double lr = 0.0;
    double total = 0.0;
    double magnitude = 0.0;
    double direction = 0.0;
};

/// Tab-separated: epoch, lr, total, magnitude, direction.
std::string format_epoch_log(const EpochLog& e);

struct TrainResult
{
    VhnParams params;
    std::vector<EpochLog> history;
    int best_epoch = -1;
    double best_loss = 0.0;
};

struct TrainOptions
{
    /// Where `best.ckpt` / `last.ckpt` and `loss.tsv` go; empty disables output.
    std::filesystem::path checkpoint_dir;
    nlohmann::json metadata = nlohmann::json::object();
    std::function<void(const EpochLog&)> on_epoch;
};

/// One step per sample per epoch (samples shuffled each epoch with the seed).
/// Throws ValidationError on an empty dataset and NumericalError on a
/// non-finite loss.
TrainResult train(
    const std::vector<TrainingSample>& samples,
    const TrainConfig& train_config,
    const VhnConfig& config,
    VhnParams params,
    const TrainOptions& options = {});

} // namespace vhn
