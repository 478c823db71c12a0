#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "fock.hpp"
#include "hamiltonian.hpp"
#include "instance.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "sym_tensor.hpp"

namespace tpca {

enum class SpdmNormalization { per_boson, raw };

struct SingleParticleDensityMatrix {
    Eigen::MatrixXcd rho;
    SpdmNormalization normalization = SpdmNormalization::per_boson;
    int n_bos = 0;
};

/// rho_{mu nu} = <x| a+_mu a_nu |x>, as W^H W with W(m, mu) = (a_mu x)[m]
/// over the (n-1)-boson basis.
template <class Scalar>
SingleParticleDensityMatrix spdm(const StateVector<Scalar>& x, SpdmNormalization normalization = SpdmNormalization::per_boson) {
    require(std::abs(x.norm() - 1.0) <= 1e-8, "spdm: state must be normalized");
    const auto& B = *x.basis;
    const int N = B.N();
    const int n = B.n_bos();
    require(n >= 1, "spdm: need at least one boson");
    const auto lower = build_basis(N, n - 1, std::max<std::uint64_t>(B.dim(), 1));
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> W(static_cast<Eigen::Index>(lower->dim()), N);
    std::vector<int> occ(static_cast<std::size_t>(N));
    for (std::size_t m = 0; m < lower->dim(); ++m) {
        auto o = lower->occupation(m);
        std::copy(o.begin(), o.end(), occ.begin());
        for (int mu = 0; mu < N; ++mu) {
            ++occ[static_cast<std::size_t>(mu)];
            const auto idx = B.rank_unchecked(std::span<const int>(occ));
            W(static_cast<Eigen::Index>(m), mu) = std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(mu)])) *
                                                  x.amps[static_cast<Eigen::Index>(idx)];
            --occ[static_cast<std::size_t>(mu)];
        }
    }
    SingleParticleDensityMatrix out;
    out.normalization = normalization;
    out.n_bos = n;
    // Stored as rho_{mu nu} = sum_m conj(W_{m mu}) W_{m nu}.
    out.rho = (W.adjoint() * W).template cast<Complex>();
    out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
    if (normalization == SpdmNormalization::per_boson) out.rho /= static_cast<double>(n);
    return out;
}

/// Cosine similarity.
inline double corr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    require(x.size() == y.size(), "corr: size mismatch");
    const double nx = x.norm(), ny = y.norm();
    require(nx > 0.0 && ny > 0.0, "corr: zero vector");
    return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

enum class RecoveryMode { eig, randomized };

inline std::string to_string(RecoveryMode m) { return m == RecoveryMode::eig ? "eig" : "randomized"; }

namespace detail {

inline Eigen::VectorXd fix_sign_and_scale(Eigen::VectorXd v) {
    const double n = v.norm();
    require(n > 0.0, "recovery: zero candidate");
    v *= std::sqrt(static_cast<double>(v.size())) / n;
    const double floor = 1e-12 * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > floor) {
            if (v[i] < 0.0) v = -v;
            break;
        }
    return v;
}

} // namespace detail

/// Real candidate vector of norm sqrt(N) read from Re(rho): its top
/// eigenvector (eig) or Re(rho) g for Gaussian g (randomized).
inline Eigen::VectorXd randomized_recover(const SingleParticleDensityMatrix& rho, Rng& rng, RecoveryMode mode = RecoveryMode::eig) {
    const Eigen::MatrixXd R = rho.rho.real();
    require(R.rows() == R.cols() && R.rows() >= 1, "randomized_recover: rho must be square");
    require(R.norm() > 0.0, "randomized_recover: rank-0 density matrix");
    if (mode == RecoveryMode::eig) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (R + R.transpose()));
        return detail::fix_sign_and_scale(es.eigenvectors().col(R.rows() - 1));
    }
    Eigen::VectorXd g(R.rows());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = standard_normal(rng);
    Eigen::VectorXd c = R * g;
    if (c.norm() == 0.0) throw ConvergenceError("randomized_recover: rho g vanished", 0.0, 1.0);
    return detail::fix_sign_and_scale(std::move(c));
}

struct BoostResult {
    Eigen::VectorXd vector; ///< norm sqrt(N)
    int iterations = 0;
    bool converged = false;
};

/// Tensor power iteration u <- T(., u, u, u) / |.| until successive iterates
/// agree to corr >= 1 - tol.
inline BoostResult boost(const RealTensor& T0, const Eigen::VectorXd& u0, int max_iters = 50, double tol = 1e-8) {
    require(u0.size() == T0.N(), "boost: size mismatch");
    require(u0.norm() > 0.0, "boost: zero start vector");
    require(max_iters >= 1, "boost: max_iters must be >= 1");
    Eigen::VectorXd u = u0 / u0.norm();
    const double scale = std::sqrt(T0.frobenius_norm_sq());
    BoostResult out;
    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd next = contract3(T0, u);
        const double n = next.norm();
        // Below round-off of the contraction: u sits in the kernel of T.
        if (!(n > 1e-12 * scale)) throw ConvergenceError("boost: tensor contraction vanished", 0.0, 1.0);
        next /= n;
        out.iterations = it;
        const double c = next.dot(u);
        u = next;
        if (c >= 1.0 - tol) {
            out.converged = true;
            break;
        }
    }
    out.vector = u * std::sqrt(static_cast<double>(u.size()));
    return out;
}

struct EnergyBoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// <x| H(lambda^+ v^{(x)4}) |x> against lambda^+ N^2 (n-1) <v|rho|v> / |v|^2
/// with the raw-normalized rho; equality at the ideal product state.
template <class Scalar>
EnergyBoundCheck recovery_energy_bound_check(const StateVector<Scalar>& x, const Eigen::VectorXd& v_sig, double lambda_plus_value) {
    require(std::abs(x.norm() - 1.0) <= 1e-8, "recovery_energy_bound_check: state must be normalized");
    const int N = x.basis->N();
    require(v_sig.size() == N, "recovery_energy_bound_check: signal length mismatch");
    const int n = x.basis->n_bos();
    HamiltonianOperator H(rank_one_tensor(lambda_plus_value, v_sig), x.basis, false);
    EnergyBoundCheck out;
    out.lhs = expectation(H, x);
    const auto rho = spdm(x, SpdmNormalization::raw);
    const Eigen::VectorXcd vc = v_sig.cast<Complex>();
    const double vrv = std::real(vc.dot(rho.rho * vc));
    out.rhs = lambda_plus_value * static_cast<double>(N) * N * (n - 1.0) * vrv / v_sig.squaredNorm();
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-9) + 1e-12 * std::max(1.0, std::abs(out.rhs));
    return out;
}

struct RecoveryConfig {
    RecoveryMode mode = RecoveryMode::eig;
    int boost_iters = 50;
    double boost_tol = 1e-8;
    bool boost_with_t_plus = false; ///< boost with T^+ instead of T0
    bool require_detection = true;  ///< skip recovery when detection fails
};

struct RecoveryReport {
    bool detected = false;
    bool recovered = false;       ///< recovery ran to completion
    DetectionReport detection;
    Eigen::VectorXd candidate;
    Eigen::VectorXd boosted;
    double corr_initial = 0.0;    ///< only meaningful when v_sig is known
    double corr_boosted = 0.0;
    int iterations = 0;
    bool has_reference = false;
};

/// SPDM -> candidate -> boost on a given normalized state; fills the
/// recovery fields of `rep`.
inline void recover_from_state(const RealTensor& boost_tensor, const Eigen::VectorXd& v_sig, const ComplexState& state,
                               const RecoveryConfig& rcfg, Rng& rng, RecoveryReport& rep) {
    const auto rho = spdm(state, SpdmNormalization::per_boson);
    rep.candidate = randomized_recover(rho, rng, rcfg.mode);
    const auto b = boost(boost_tensor, rep.candidate, rcfg.boost_iters, rcfg.boost_tol);
    rep.boosted = detail::fix_sign_and_scale(b.vector);
    rep.iterations = b.iterations;
    rep.recovered = true;
    rep.has_reference = v_sig.size() == boost_tensor.N();
    if (rep.has_reference) {
        rep.corr_initial = corr(rep.candidate, v_sig);
        rep.corr_boosted = corr(rep.boosted, v_sig);
    }
}

/// detect -> project -> SPDM -> candidate -> boost. v_sig may be empty, in
/// which case correlations are left at 0.
inline RecoveryReport recover_chain(const RealTensor& T0, const Eigen::VectorXd& v_sig, const ModelParams& params,
                                    const DetectionConfig& cfg, const RecoveryConfig& rcfg, Rng& rng) {
    RecoveryReport rep;
    const auto run = run_projection(T0, params, cfg, rng);
    rep.detection = make_projection_report("projection", run, params, cfg);
    rep.detection.verdict = rep.detection.statistic >= rep.detection.threshold ? Verdict::spiked : Verdict::unspiked;
    rep.detected = rep.detection.verdict == Verdict::spiked;
    rep.has_reference = v_sig.size() == T0.N();
    if ((rcfg.require_detection && !rep.detected) || run.filtered.state.norm() == 0.0) return rep;
    recover_from_state(rcfg.boost_with_t_plus ? run.pair.t_plus : T0, v_sig, run.filtered.state.normalized(), rcfg, rng, rep);
    return rep;
}

} // namespace tpca
