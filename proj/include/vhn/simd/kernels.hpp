#pragma once

#include <Eigen/Core>

#include <complex>
#include <string_view>

namespace vhn::simd {

/// Instruction-set variants of the dense inner-loop kernels.
enum class Isa
{
    scalar,
    avx2, ///< AVX2 + FMA, x86-64 only.
};

std::string_view to_string(Isa isa);
bool is_supported(Isa isa);

/// Kernel variant used by default. Chosen once from CPU features; the
/// environment variable VHN_SIMD=scalar|avx2 overrides the detection.
Isa active_isa();
/// Throws vhn::ValidationError when `isa` is not supported on this CPU.
void set_active_isa(Isa isa);

using MatrixXc = Eigen::MatrixXcd;

/// Z = Y W for complex Y (n x a) and real W (a x b).
MatrixXc apply_real_weights(const MatrixXc& Y, const Eigen::MatrixXd& W, Isa isa = active_isa());

/// dY = dZ W^T.
MatrixXc apply_real_weights_transposed(const MatrixXc& dZ, const Eigen::MatrixXd& W, Isa isa = active_isa());

/// dW = Re(Y^H dZ): the real-pair gradient of a real weight matrix.
Eigen::MatrixXd real_weight_gradient(const MatrixXc& Y, const MatrixXc& dZ, Isa isa = active_isa());

/// Phi^H X for Phi (n x k) and X (n x c).
MatrixXc project(const MatrixXc& Phi, const MatrixXc& X, Isa isa = active_isa());

/// Phi C for Phi (n x k) and C (k x c).
MatrixXc expand(const MatrixXc& Phi, const MatrixXc& C, Isa isa = active_isa());

/// X_ij = max(|Z_ij| - b_j, 0) Z_ij / |Z_ij|, and 0 where |Z_ij| <= guard.
MatrixXc magnitude_relu(const MatrixXc& Z, const Eigen::VectorXd& bias, double guard, Isa isa = active_isa());

/// Backward pass of magnitude_relu. Writes dZ and adds the bias gradient into dbias.
void magnitude_relu_backward(
    const MatrixXc& Z,
    const Eigen::VectorXd& bias,
    double guard,
    const MatrixXc& dX,
    MatrixXc& dZ,
    Eigen::VectorXd& dbias,
    Isa isa = active_isa());

} // namespace vhn::simd
