#include <cmath>

#include <gtest/gtest.h>

#include "full_space.hpp"
#include "tpca/recovery.hpp"

using namespace tpca;

namespace {

// rho_{mu nu} = <x| a+_mu a_nu |x> by applying the ladder operators to each
// occupation vector.
Eigen::MatrixXcd ladder_spdm(const ComplexState& x) {
    const auto& B = *x.basis;
    const int N = B.N();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(N, N);
    for (std::size_t c = 0; c < B.dim(); ++c)
        for (int mu = 0; mu < N; ++mu)
            for (int nu = 0; nu < N; ++nu) {
                auto occ = B.unrank(c);
                if (occ[nu] == 0) continue;
                double amp = std::sqrt(static_cast<double>(occ[nu]));
                --occ[nu];
                ++occ[mu];
                amp *= std::sqrt(static_cast<double>(occ[mu]));
                const auto r = static_cast<Eigen::Index>(B.rank(occ));
                rho(mu, nu) += std::conj(x.amps[r]) * amp * x.amps[static_cast<Eigen::Index>(c)];
            }
    return rho;
}

ComplexState random_state(const BasisPtr& b, Rng& rng) {
    Eigen::VectorXcd a(static_cast<Eigen::Index>(b->dim()));
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = Complex(standard_normal(rng), standard_normal(rng));
    return ComplexState(b, a.normalized());
}

Eigen::MatrixXd random_orthogonal(int N, Rng& rng) {
    Eigen::MatrixXd A(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) A(i, j) = standard_normal(rng);
    return Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
}

Eigen::VectorXd axis(int N, int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(N);
    e[i] = std::sqrt(static_cast<double>(N));
    return e;
}

} // namespace

TEST(Spdm, IdealStateIsCondensed) {
    const int N = 4, n = 5;
    const auto b = build_basis(N, n);
    const auto psi = embed_product_state(b, axis(N, 0)).cast<Complex>();
    const auto raw = spdm(psi, SpdmNormalization::raw);
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(N, N);
    want(0, 0) = n;
    EXPECT_LE((raw.rho - want).norm(), 1e-12);
    EXPECT_NEAR(spdm(psi).rho(0, 0).real(), 1.0, 1e-12);
}

TEST(Spdm, ProductStateIsProjector) {
    Rng rng(1);
    const int N = 3, n = 3;
    const auto v = sample_signal(N, rng);
    const auto x = embed_product_state(build_basis(N, n), v).cast<Complex>();
    const auto rho = spdm(x);
    const Eigen::MatrixXd want = v * v.transpose() / static_cast<double>(N);
    EXPECT_LE((rho.rho - want.cast<Complex>()).norm(), 1e-12);
    EXPECT_LE((ladder_spdm(x) / static_cast<double>(n) - rho.rho).norm(), 1e-12);
}

TEST(Spdm, MatchesLadderOracleAndContract) {
    Rng rng(2);
    for (auto [N, n] : {std::pair{3, 3}, std::pair{4, 4}, std::pair{2, 6}}) {
        const auto x = random_state(build_basis(N, n), rng);
        const auto raw = spdm(x, SpdmNormalization::raw);
        EXPECT_LE((raw.rho - ladder_spdm(x)).norm(), 1e-12);
        EXPECT_LE((raw.rho - raw.rho.adjoint()).norm(), 1e-10);
        EXPECT_NEAR(raw.rho.trace().real(), n, 1e-9);
        const auto pb = spdm(x);
        EXPECT_NEAR(pb.rho.trace().real(), 1.0, 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pb.rho);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
    RealState unnormalized(build_basis(3, 2));
    unnormalized.amps[0] = 3.0;
    EXPECT_THROW(spdm(unnormalized), InvalidParameter);
}

TEST(Spdm, RotationEquivariance) {
    Rng rng(3);
    const int N = 3, n = 3;
    const auto b = build_basis(N, n);
    const auto x = random_state(b, rng);
    const Eigen::MatrixXd U = random_orthogonal(N, rng);
    // U^{(x) n} on the full space, then back to occupations.
    Eigen::MatrixXd K = U;
    for (int i = 1; i < n; ++i) {
        Eigen::MatrixXd next(K.rows() * N, K.cols() * N);
        for (Eigen::Index r = 0; r < K.rows(); ++r)
            for (Eigen::Index c = 0; c < K.cols(); ++c) next.block(r * N, c * N, N, N) = K(r, c) * U;
        K = next;
    }
    const Eigen::MatrixXd P = oracle::symmetric_isometry(b);
    const ComplexState y(b, (P * K * P.transpose()).cast<Complex>() * x.amps);
    EXPECT_NEAR(y.norm(), 1.0, 1e-12);
    const Eigen::MatrixXcd Uc = U.cast<Complex>();
    const Eigen::MatrixXcd want = Uc * spdm(x).rho * Uc.transpose();
    EXPECT_LE((spdm(y).rho - want).norm(), 1e-8);
}

TEST(Corr, Examples) {
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    EXPECT_NEAR(corr(x, x), 1.0, 1e-15);
    EXPECT_NEAR(corr(x, -x), -1.0, 1e-15);
    EXPECT_EQ(corr(Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()), 0.0);
    EXPECT_THROW(corr(x, Eigen::Vector3d::Zero()), InvalidParameter);
    EXPECT_THROW(corr(x, Eigen::Vector2d::Ones()), InvalidParameter);
}

TEST(Candidate, RankOneDensity) {
    Rng rng(4);
    const int N = 5;
    SingleParticleDensityMatrix rho;
    rho.rho = Eigen::MatrixXcd::Zero(N, N);
    rho.rho(0, 0) = 1.0;
    for (auto mode : {RecoveryMode::eig, RecoveryMode::randomized}) {
        const auto c = randomized_recover(rho, rng, mode);
        EXPECT_LE((c - axis(N, 0)).norm(), 1e-12) << to_string(mode);
    }
    rho.rho.setZero();
    EXPECT_THROW(randomized_recover(rho, rng), InvalidParameter);
}

TEST(Candidate, RotatedIdealState) {
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        const int N = 4, n = 4;
        const auto v = sample_signal(N, rng);
        const auto rho = spdm(embed_product_state(build_basis(N, n), v));
        for (auto mode : {RecoveryMode::eig, RecoveryMode::randomized}) {
            const auto c = randomized_recover(rho, rng, mode);
            EXPECT_NEAR(std::abs(corr(c, v)), 1.0, 1e-8);
            EXPECT_NEAR(c.norm(), std::sqrt(N), 1e-10);
            EXPECT_GT(c[0], 0.0);
        }
    }
}

TEST(Candidate, MaximallyMixedGivesRandomDirection) {
    const int N = 64, S = 200;
    SingleParticleDensityMatrix rho;
    rho.rho = Eigen::MatrixXcd::Identity(N, N) / static_cast<double>(N);
    Rng rng(6);
    const auto fixed = sample_signal(N, rng);
    int ok_eig = 0, ok_rand = 0;
    for (int s = 0; s < S; ++s) {
        const auto v = sample_signal(N, rng);
        ok_eig += std::abs(corr(randomized_recover(rho, rng, RecoveryMode::eig), v)) <= 4.0 / std::sqrt(N);
        ok_rand += std::abs(corr(randomized_recover(rho, rng, RecoveryMode::randomized), fixed)) <= 4.0 / std::sqrt(N);
    }
    EXPECT_GE(ok_eig, 0.95 * S);
    EXPECT_GE(ok_rand, 0.95 * S);
}

TEST(Boost, NoiselessConvergesImmediately) {
    Rng rng(7);
    const int N = 8;
    const auto v = sample_signal(N, rng);
    const auto T = rank_one_tensor(0.3, v);
    for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd u0(N);
        for (int i = 0; i < N; ++i) u0[i] = standard_normal(rng);
        const auto r = boost(T, u0);
        EXPECT_LE(r.iterations, 3);
        EXPECT_TRUE(r.converged);
        EXPECT_NEAR(std::abs(corr(r.vector, v)), 1.0, 1e-10);
        EXPECT_NEAR(r.vector.norm(), std::sqrt(N), 1e-10);
    }
}

TEST(Boost, OrthogonalStartIsDegenerate) {
    Rng rng(8);
    const int N = 6;
    const auto v = sample_signal(N, rng);
    Eigen::VectorXd u0(N);
    for (int i = 0; i < N; ++i) u0[i] = standard_normal(rng);
    u0 -= v * (v.dot(u0) / v.squaredNorm());
    EXPECT_THROW(boost(rank_one_tensor(1.0, v), u0), ConvergenceError);
    EXPECT_THROW(boost(RealTensor(N), u0), ConvergenceError);
    EXPECT_THROW(boost(rank_one_tensor(1.0, v), Eigen::VectorXd::Zero(N)), InvalidParameter);
}

TEST(Boost, DeskScaleWeakStart) {
    // N = 16 with lambda N^2 = 128 and a start of correlation 0.4.
    const int N = 16, S = 50;
    const double lam = 0.5;
    Rng rng(9);
    int good = 0;
    for (int s = 0; s < S; ++s) {
        const auto v = sample_signal(N, rng);
        const auto T = make_spiked(lam, v, sample_gaussian_tensor<double>(N, rng)).T;
        Eigen::VectorXd w(N);
        for (int i = 0; i < N; ++i) w[i] = standard_normal(rng);
        w -= v * (v.dot(w) / v.squaredNorm());
        const Eigen::VectorXd u0 = 0.4 * v.normalized() + std::sqrt(1.0 - 0.16) * w.normalized();
        const auto r = boost(T, u0);
        good += std::abs(corr(r.vector, v)) >= 0.9;
    }
    EXPECT_GE(good, 0.8 * S);
}

TEST(EnergyBound, IdealStateIsTight) {
    Rng rng(10);
    const int N = 4, n = 4;
    const double lp = 0.2;
    const auto v = sample_signal(N, rng);
    const auto psi = embed_product_state(build_basis(N, n), v);
    const auto c = recovery_energy_bound_check(psi, v, lp);
    EXPECT_NEAR(c.lhs, lp * N * N * n * (n - 1.0), 1e-10);
    EXPECT_NEAR(c.rhs, c.lhs, 1e-10);
    EXPECT_TRUE(c.holds);

    const auto b = build_basis(N, n);
    RealState other(b);
    other.amps[static_cast<Eigen::Index>(b->rank(std::vector<int>{0, n, 0, 0}))] = 1.0;
    const auto z = recovery_energy_bound_check(other, axis(N, 0), lp);
    EXPECT_EQ(z.lhs, 0.0);
    EXPECT_EQ(z.rhs, 0.0);
    EXPECT_TRUE(z.holds);
}

TEST(EnergyBound, RandomStates) {
    Rng rng(11);
    const auto b = build_basis(3, 4);
    for (int t = 0; t < 100; ++t) {
        const auto v = sample_signal(3, rng);
        EXPECT_TRUE(recovery_energy_bound_check(random_state(b, rng), v, 0.7).holds);
    }
}

TEST(Chain, NoiselessRecoversExactly) {
    ModelParams p;
    p.N = 5;
    p.n_bos = 4;
    p.lambda_bar = 0.5;
    Rng rng(12);
    const auto v = sample_signal(p.N, rng);
    const auto T0 = rank_one_tensor(p.lambda_bar, v);
    const auto pair = decorrelate_with(T0, p.lambda_bar, effective_zeta(p), RealTensor(p.N));
    const auto f = filter_input_state(pair, p.n_bos, p, {});
    RecoveryReport rep;
    recover_from_state(T0, v, f.state.normalized(), {}, rng, rep);
    EXPECT_TRUE(rep.recovered);
    EXPECT_NEAR(std::abs(rep.corr_initial), 1.0, 1e-10);
    EXPECT_NEAR(std::abs(rep.corr_boosted), 1.0, 1e-10);
    EXPECT_NEAR(rep.candidate.norm(), std::sqrt(p.N), 1e-10);
}

TEST(Chain, DetectionGuardAndSignInvariance) {
    ModelParams p;
    p.N = 5;
    p.n_bos = 4;
    p.lambda_bar = 0.6;
    Rng rng(13);
    for (int t = 0; t < 4; ++t) {
        const bool spiked = t % 2 == 0;
        const auto v = sample_signal(p.N, rng);
        const auto T0 = make_spiked(spiked ? p.lambda_bar : 0.0, v, sample_gaussian_tensor<double>(p.N, rng)).T;
        Rng a(30 + t), b(30 + t);
        const auto r = recover_chain(T0, v, p, {}, {}, a);
        const auto m = recover_chain(T0, Eigen::VectorXd(-v), p, {}, {}, b);
        EXPECT_EQ(r.recovered, r.detected);
        EXPECT_EQ(r.detected, r.detection.statistic >= r.detection.threshold);
        EXPECT_NEAR(std::abs(r.corr_boosted), std::abs(m.corr_boosted), 1e-12);
        EXPECT_NEAR(std::abs(r.corr_initial), std::abs(m.corr_initial), 1e-12);
        EXPECT_LE(std::abs(r.corr_initial), 1.0);
        if (r.recovered) {
            EXPECT_NEAR(r.candidate.norm(), std::sqrt(p.N), 1e-10);
        }
    }
}
