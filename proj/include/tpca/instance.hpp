#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"
#include "sym_tensor.hpp"

namespace tpca {

enum class Ensemble { real, complex };

/// How the symmetrized Gaussian noise is scaled. `average` is the plain
/// mean over the 24 index permutations of an iid unit-variance tensor
/// (distinct-index entries then have variance 1/24). `unit_distinct`
/// rescales by sqrt(24) so distinct-index entries have unit variance.
enum class VarianceConvention { average, unit_distinct };

inline double noise_scale(VarianceConvention c) { return c == VarianceConvention::average ? 1.0 : std::sqrt(24.0); }

inline std::string to_string(Ensemble e) { return e == Ensemble::real ? "real" : "complex"; }
inline std::string to_string(VarianceConvention c) { return c == VarianceConvention::average ? "average" : "unit_distinct"; }

struct ModelParams {
    int N = 4;
    int n_bos = 4;
    int p = 4;
    double lambda_bar = 0.0;
    double zeta = 0.0; ///< 0 selects the default rule 1/ln N
    std::uint64_t seed = 0;
    Ensemble ensemble = Ensemble::real;
    VarianceConvention convention = VarianceConvention::average;

    void validate() const {
        require(N >= 1, "N must be >= 1");
        require(p == 4, "only p = 4 is supported");
        require(n_bos >= 2, "n_bos must be >= 2");
        require(lambda_bar >= 0.0, "lambda_bar must be nonnegative");
        require(zeta >= 0.0, "zeta must be positive (0 selects the default)");
    }

    void validate_for_input_state() const {
        validate();
        require(n_bos % 4 == 0, "n_bos must be a multiple of 4 for the input state");
    }
};

/// Decorrelation strength 1/ln N.
inline double default_zeta(int N) {
    require(N >= 2, "default_zeta: N must be >= 2");
    return 1.0 / std::log(static_cast<double>(N));
}

inline double effective_zeta(const ModelParams& params) {
    return params.zeta > 0.0 ? params.zeta : default_zeta(params.N);
}

/// lambda^+ = lambda (1 + zeta^2)^{-1/2}
inline double lambda_plus(double lambda, double zeta) { return lambda / std::sqrt(1.0 + zeta * zeta); }
/// lambda^- = lambda (1 + zeta^{-2})^{-1/2}
inline double lambda_minus(double lambda, double zeta) { return lambda / std::sqrt(1.0 + 1.0 / (zeta * zeta)); }

/// Expected full-array squared norm of one symmetrized noise tensor, divided by N^4.
inline double noise_norm_per_entry(int N, VarianceConvention c) {
    const double s = noise_scale(c);
    return s * s * static_cast<double>(binomial(N + 3, 4)) / std::pow(static_cast<double>(N), 4);
}

/// Haar-uniform vector on the sphere of radius sqrt(N).
inline Eigen::VectorXd sample_signal(int N, Rng& rng) {
    require(N >= 1, "sample_signal: N must be >= 1");
    Eigen::VectorXd v(N);
    double norm = 0.0;
    do {
        for (int i = 0; i < N; ++i) v[i] = standard_normal(rng);
        norm = v.norm();
    } while (norm == 0.0);
    return v * (std::sqrt(static_cast<double>(N)) / norm);
}

/// Symmetrization of an iid Gaussian order-4 tensor.
///
/// The symmetrized slot with multiplicities m is (prod m!/24) times a sum of
/// 24/prod(m!) iid entries, i.e. Normal(0, prod(m!)/24); it is drawn directly
/// from that law instead of materializing N^4 entries.
template <class Scalar = double>
SymTensor4<Scalar> sample_gaussian_tensor(int N, Rng& rng, VarianceConvention convention = VarianceConvention::average) {
    require(N >= 1, "sample_gaussian_tensor: N must be >= 1");
    SymTensor4<Scalar> G(N);
    const double scale = noise_scale(convention);
    std::size_t i = 0;
    for (const auto& t : G.canonical_tuples()) {
        const double sd = scale * std::sqrt(1.0 / orbit_size(t));
        if constexpr (is_complex_v<Scalar>) {
            const double re = standard_normal(rng);
            const double im = standard_normal(rng);
            G.canonical(i) = Scalar(re, im) * (sd / std::sqrt(2.0));
        } else {
            G.canonical(i) = sd * standard_normal(rng);
        }
        ++i;
    }
    return G;
}

struct SpikedTensor {
    RealTensor T;
    double lambda = 0.0;
    bool spiked = false;
};

/// T = lambda v^{(x)4} + G.
inline SpikedTensor make_spiked(double lambda, const Eigen::VectorXd& v, const RealTensor& G) {
    require(v.size() == G.N(), "make_spiked: signal length does not match tensor");
    require(lambda >= 0.0, "make_spiked: lambda must be nonnegative");
    SpikedTensor out{G, lambda, lambda > 0.0};
    if (lambda > 0.0) out.T += rank_one_tensor(lambda, v);
    return out;
}

struct DecorrelatedPair {
    RealTensor t_plus;
    ComplexTensor t_minus;
    double zeta = 0.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    bool minus_is_real = true;
};

/// Splits T0 with fresh noise G' into T+ = (T0 + zeta G')/sqrt(1+zeta^2) and
/// T- = (T0 - G'/zeta)/sqrt(1+zeta^2). The noise parts of the two are
/// independent. With add_imaginary, T- additionally receives independent
/// imaginary Gaussian noise so that its noise matches the complex ensemble.
inline DecorrelatedPair decorrelate_with(const RealTensor& T0, double lambda_bar, double zeta, const RealTensor& Gprime,
                                         const RealTensor* imaginary = nullptr) {
    require(zeta > 0.0, "decorrelate: zeta must be > 0");
    require(Gprime.N() == T0.N(), "decorrelate: noise tensor mode count mismatch");
    const double norm = 1.0 / std::sqrt(1.0 + zeta * zeta);
    DecorrelatedPair out;
    out.zeta = zeta;
    out.lambda_plus = lambda_plus(lambda_bar, zeta);
    out.lambda_minus = lambda_minus(lambda_bar, zeta);
    out.t_plus = norm * (T0 + zeta * Gprime);
    RealTensor minus = norm * (T0 - (1.0 / zeta) * Gprime);
    out.t_minus = minus.cast<Complex>();
    if (imaginary != nullptr) {
        require(imaginary->N() == T0.N(), "decorrelate: imaginary noise mode count mismatch");
        // T- carries noise of variance zeta^-2 relative to G; the imaginary part matches it.
        const double s = 1.0 / zeta;
        for (std::size_t i = 0; i < out.t_minus.size(); ++i)
            out.t_minus.canonical(i) += Complex(0.0, s * imaginary->canonical(i));
        out.minus_is_real = false;
    }
    return out;
}

inline DecorrelatedPair decorrelate(const RealTensor& T0, double lambda_bar, double zeta, bool add_imaginary, Rng& rng,
                                    VarianceConvention convention = VarianceConvention::average) {
    require(zeta > 0.0, "decorrelate: zeta must be > 0");
    const RealTensor Gprime = sample_gaussian_tensor<double>(T0.N(), rng, convention);
    if (!add_imaginary) return decorrelate_with(T0, lambda_bar, zeta, Gprime);
    const RealTensor Gim = sample_gaussian_tensor<double>(T0.N(), rng, convention);
    return decorrelate_with(T0, lambda_bar, zeta, Gprime, &Gim);
}

/// Orthogonal matrix whose first row is v/|v|, so that U v = |v| e_0.
inline Eigen::MatrixXd rotation_to_axis(const Eigen::VectorXd& v) {
    const int n = static_cast<int>(v.size());
    require(n >= 1 && v.norm() > 0.0, "rotation_to_axis: zero vector");
    // Householder reflection mapping v/|v| to e_0.
    Eigen::VectorXd u = v / v.norm();
    Eigen::VectorXd w = u;
    w[0] -= 1.0;
    if (w.norm() < 1e-14) return Eigen::MatrixXd::Identity(n, n);
    w.normalize();
    return Eigen::MatrixXd::Identity(n, n) - 2.0 * w * w.transpose();
}

} // namespace tpca
