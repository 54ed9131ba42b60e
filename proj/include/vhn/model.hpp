#pragma once

#include <vhn/spectral.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vhn {

struct VhnConfig
{
    int num_blocks = 6;
    int hidden_channels = 256;
    /// Diffusion times per block, shared by all channels of the block.
    int diffusion_times = 4;
    Index k = 128;
    int in_channels = 30;
    int out_channels = 1;
    double dropout = 0.5;

    /// Throws ValidationError unless every count is >= 1 (blocks >= 0) and dropout is in [0, 1).
    void validate() const;
};

void to_json(nlohmann::json& j, const VhnConfig& c);
void from_json(const nlohmann::json& j, VhnConfig& c);

/// Real weights (fan_in x fan_out) and one magnitude bias per output channel.
struct LinearLayer
{
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

struct BlockParams
{
    /// rho; the diffusion times are s = exp(rho) * t_scale.
    Eigen::VectorXd log_time;
    LinearLayer first;  ///< m*c -> c
    LinearLayer second; ///< c -> c
};

struct VhnParams
{
    LinearLayer input;
    std::vector<BlockParams> blocks;
    LinearLayer output;
    /// Time unit fixed at initialization (mean squared edge length of the
    /// reference mesh). Not trained.
    double t_scale = 1.0;

    Eigen::VectorXd diffusion_times(std::size_t block) const;
};

enum class ParamKind
{
    weight,
    bias,
    log_time,
};

struct ParamView
{
    std::string name;
    std::span<double> values;
    ParamKind kind;
};

/// Every trainable array in declaration order: input weight, input bias, then
/// per block log_time, first weight/bias, second weight/bias, then output weight/bias.
std::vector<ParamView> parameter_views(VhnParams& params);
std::size_t count_parameters(const VhnConfig& config);
std::size_t count_parameters(const VhnParams& params);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, rho ~ U(-2, 2).
VhnParams init_params(const VhnConfig& config, double t_scale, std::uint64_t seed);
/// Same shapes, all zeros.
VhnParams zeros_like(const VhnParams& params);

enum class Mode
{
    train,
    eval,
};

/// Intermediate values kept by forward() for backpropagation.
struct BlockTape
{
    MatrixXc x_in;
    MatrixXc coeffs;   ///< Phi^H M x_in (k x c)
    /// [D_1 C .. D_m C] with D_i = exp(-lambda s_i), k x m*c. The diffused
    /// features are Y_i = Phi D_i C; the first layer is applied before expanding.
    MatrixXc spectral;
    MatrixXc pre1;
    MatrixXc dropped;  ///< first layer output after dropout
    Eigen::ArrayXXd mask; ///< dropout multipliers (empty when dropout is inactive)
    MatrixXc pre2;
};

struct ForwardTape
{
    MatrixXc features;
    MatrixXc pre_in;
    std::vector<BlockTape> blocks;
    MatrixXc x_out;
    MatrixXc pre_out;
};

/// Z = Y W followed by the magnitude nonlinearity max(|z| - b, 0) z / |z|.
MatrixXc vector_layer(const LinearLayer& layer, const MatrixXc& input, double guard = default_tolerances().magnitude_guard);

/// Dropout multipliers for an n x c activation: 0 with probability p, else
/// 1 / (1 - p). Deterministic in (seed, stream).
Eigen::ArrayXXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed, std::uint64_t stream);

/// Layers applied in order; in train mode with dropout > 0, each layer after
/// the first sees its input through a dropout mask.
MatrixXc vector_mlp(
    std::span<const LinearLayer> layers,
    const MatrixXc& input,
    double dropout,
    Mode mode,
    std::uint64_t seed,
    std::uint64_t stream = 0);

/// Network output (n x out_channels). Throws ValidationError on shape mismatch.
MatrixXc forward(
    const VhnParams& params,
    const VhnConfig& config,
    const SpectralBasis& basis,
    const MassMatrix& M,
    const MatrixXc& features,
    Mode mode,
    std::uint64_t seed,
    ForwardTape* tape = nullptr);

struct Checkpoint
{
    VhnConfig config;
    VhnParams params;
    /// Free-form run metadata (feature spec, content hashes, rosy order, ...).
    nlohmann::json metadata = nlohmann::json::object();
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Validates magic, version, checksum, parameter count and array shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace vhn
