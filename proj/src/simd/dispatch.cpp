#include "kernel_table.hpp"

#include <vhn/error.hpp>
#include <vhn/simd/kernels.hpp>

#include <atomic>
#include <cstdlib>
#include <string>

namespace vhn::simd {

namespace {

Isa detect()
{
    if (const char* env = std::getenv("VHN_SIMD")) {
        const std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && is_supported(Isa::avx2)) return Isa::avx2;
    }
    return is_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& active()
{
    static std::atomic<Isa> isa{detect()};
    return isa;
}

const detail::KernelTable& table(Isa isa)
{
#if defined(VHN_HAVE_AVX2)
    if (isa == Isa::avx2) return detail::avx2_kernels();
#endif
    if (isa != Isa::scalar) throw ValidationError("kernel variant '" + std::string(to_string(isa)) + "' is not available");
    return detail::scalar_kernels();
}

// A complex column-major n x c matrix viewed as a real 2n x c matrix.
const double* real_view(const MatrixXc& m) { return reinterpret_cast<const double*>(m.data()); }
double* real_view(MatrixXc& m) { return reinterpret_cast<double*>(m.data()); }

std::size_t sz(Eigen::Index i) { return static_cast<std::size_t>(i); }

void require(bool ok, const char* what)
{
    if (!ok) throw ValidationError(std::string("shape mismatch in ") + what);
}

} // namespace

std::string_view to_string(Isa isa)
{
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool is_supported(Isa isa)
{
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(VHN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa)
{
    if (!is_supported(isa)) {
        throw ValidationError("kernel variant '" + std::string(to_string(isa)) + "' is not supported on this CPU");
    }
    active().store(isa, std::memory_order_relaxed);
}

MatrixXc apply_real_weights(const MatrixXc& Y, const Eigen::MatrixXd& W, Isa isa)
{
    require(Y.cols() == W.rows(), "apply_real_weights");
    MatrixXc Z(Y.rows(), W.cols());
    table(isa).gemm_nn(2 * sz(Y.rows()), sz(W.rows()), sz(W.cols()), real_view(Y), W.data(), real_view(Z));
    return Z;
}

MatrixXc apply_real_weights_transposed(const MatrixXc& dZ, const Eigen::MatrixXd& W, Isa isa)
{
    require(dZ.cols() == W.cols(), "apply_real_weights_transposed");
    const Eigen::MatrixXd Wt = W.transpose();
    MatrixXc dY(dZ.rows(), W.rows());
    table(isa).gemm_nn(2 * sz(dZ.rows()), sz(Wt.rows()), sz(Wt.cols()), real_view(dZ), Wt.data(), real_view(dY));
    return dY;
}

Eigen::MatrixXd real_weight_gradient(const MatrixXc& Y, const MatrixXc& dZ, Isa isa)
{
    require(Y.rows() == dZ.rows(), "real_weight_gradient");
    Eigen::MatrixXd G(Y.cols(), dZ.cols());
    table(isa).gemm_tn(2 * sz(Y.rows()), sz(Y.cols()), sz(dZ.cols()), real_view(Y), real_view(dZ), G.data());
    return G;
}

MatrixXc project(const MatrixXc& Phi, const MatrixXc& X, Isa isa)
{
    require(Phi.rows() == X.rows(), "project");
    MatrixXc Out(Phi.cols(), X.cols());
    table(isa).cgemm_cn(sz(Phi.rows()), sz(Phi.cols()), sz(X.cols()), Phi.data(), X.data(), Out.data());
    return Out;
}

MatrixXc expand(const MatrixXc& Phi, const MatrixXc& C, Isa isa)
{
    require(Phi.cols() == C.rows(), "expand");
    MatrixXc Out(Phi.rows(), C.cols());
    table(isa).cgemm_nn(sz(Phi.rows()), sz(Phi.cols()), sz(C.cols()), Phi.data(), C.data(), Out.data());
    return Out;
}

MatrixXc magnitude_relu(const MatrixXc& Z, const Eigen::VectorXd& bias, double guard, Isa isa)
{
    require(Z.cols() == bias.size(), "magnitude_relu");
    MatrixXc X(Z.rows(), Z.cols());
    table(isa).magnitude_relu(sz(Z.rows()), sz(Z.cols()), Z.data(), bias.data(), guard, X.data());
    return X;
}

void magnitude_relu_backward(
    const MatrixXc& Z,
    const Eigen::VectorXd& bias,
    double guard,
    const MatrixXc& dX,
    MatrixXc& dZ,
    Eigen::VectorXd& dbias,
    Isa isa)
{
    require(Z.cols() == bias.size() && dX.rows() == Z.rows() && dX.cols() == Z.cols() && dbias.size() == bias.size(),
            "magnitude_relu_backward");
    dZ.resize(Z.rows(), Z.cols());
    table(isa).magnitude_relu_backward(
        sz(Z.rows()), sz(Z.cols()), Z.data(), bias.data(), guard, dX.data(), dZ.data(), dbias.data());
}

} // namespace vhn::simd
