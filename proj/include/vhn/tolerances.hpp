#pragma once

namespace vhn {

/// Numerical thresholds shared across modules.
struct Tolerances
{
    /// Faces with area below `degenerate_area * bbox_diagonal^2` are rejected.
    double degenerate_area = 1e-12;
    /// Edges shorter than `degenerate_edge * bbox_diagonal` cannot seed a tangent basis.
    double degenerate_edge = 1e-12;
    /// Eigenvalues above `-negative_eigenvalue * lambda_k` are clamped to zero.
    double negative_eigenvalue = 1e-8;
    /// Per-column residual bound `|L x - lambda M x| <= eigen_residual * lambda_k`.
    double eigen_residual = 1e-6;
    /// Magnitude nonlinearity singularity guard.
    double magnitude_guard = 1e-20;
    /// Ground-truth magnitudes at or below this are masked out of the loss.
    double vanishing_ground_truth = 1e-12;
    /// Feature channels with mean magnitude below `degenerate_channel * bbox_diagonal` stay unscaled.
    double degenerate_channel = 1e-12;
};

inline const Tolerances& default_tolerances()
{
    static const Tolerances tol{};
    return tol;
}

} // namespace vhn
