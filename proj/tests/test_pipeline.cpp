#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "tpca/pipeline.hpp"

using namespace tpca;

namespace {

ModelParams small_params(int N, int n, double lam) {
    ModelParams p;
    p.N = N;
    p.n_bos = n;
    p.lambda_bar = lam;
    return p;
}

RealTensor spiked_tensor(const ModelParams& p, Rng& rng, bool spiked, Eigen::VectorXd* v_out = nullptr) {
    const auto v = sample_signal(p.N, rng);
    if (v_out) *v_out = v;
    return make_spiked(spiked ? p.lambda_bar : 0.0, v, sample_gaussian_tensor<double>(p.N, rng)).T;
}

// Exact spectral weight of x above cut for H(T).
double dense_weight(const RealTensor& T, const ComplexState& x, double cut) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(materialize_dense(HamiltonianOperator(T, x.basis)));
    double w = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] >= cut) w += std::norm(es.eigenvectors().col(i).cast<Complex>().dot(x.amps));
    return w;
}

} // namespace

TEST(Config, Validation) {
    DetectionConfig c;
    EXPECT_NO_THROW(c.validate());
    c.c_prime = 1.0;
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.slack = 0.5;
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.c_doubleprime = 0.5;
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.tol = 0.0;
    EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(Cutoff, Examples) {
    auto p = small_params(4, 4, 0.0);
    p.zeta = 0.5;
    p.lambda_bar = 0.1 * std::sqrt(1.25); // lambda^+ = 0.1
    DetectionConfig c;
    c.c_prime = 0.2;
    EXPECT_NEAR(projection_cutoff(p, c), 15.36, 1e-12);
    c.c_prime = 0.0;
    EXPECT_NEAR(projection_cutoff(p, c), 0.1 * 16 * 12, 1e-12);
    // Below E_0 whenever c' > 0.
    for (double cp : {0.01, 0.2, 0.5}) {
        c.c_prime = cp;
        EXPECT_LT(projection_cutoff(p, c), e_zero(p.lambda_bar, p.N, p.n_bos));
    }
}

TEST(Threshold, Examples) {
    EXPECT_NEAR(p_threshold(1.0, 2, 4, 1.0, 10.0), 0.05, 1e-15);
    EXPECT_NEAR(p_threshold(1e9, 5, 8, 1.0, 10.0), 0.1, 1e-12);
    EXPECT_EQ(p_threshold(0.0, 5, 8, 1.0, 10.0), 0.0);
    EXPECT_THROW(p_threshold(1.0, 5, 6, 1.0, 10.0), InvalidParameter);

    auto p = small_params(6, 8, 0.3);
    DetectionConfig c;
    const double s = noise_norm_per_entry(6, VarianceConvention::average);
    EXPECT_DOUBLE_EQ(default_s_plus(p, c), s);
    c.add_imaginary = true;
    EXPECT_DOUBLE_EQ(default_s_plus(p, c), 2.0 * s);
    c.s_plus = 0.7;
    EXPECT_DOUBLE_EQ(default_s_plus(p, c), 0.7);
}

TEST(Threshold, ScalesAsInverseRootDimension) {
    // Fixed lambda^- N and noise 1/24 per entry: log_N(P_> slack)/n -> -1/2.
    const int n = 8;
    double prev = 1.0;
    for (double N : {1e3, 1e5, 1e7, 1e9}) {
        const double lm = 1.0 / N;
        const double r = std::log(p_threshold(lm, static_cast<int>(N), n, 1.0 / 24.0, 1.0)) / std::log(N) / n;
        const double dist = std::abs(r + 0.5);
        EXPECT_LT(dist, prev);
        prev = dist;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(Spectral, NoiselessAndZero) {
    Rng rng(1);
    auto p = small_params(5, 4, 0.5);
    const auto v = sample_signal(5, rng);
    const auto r = detect_spectral(rank_one_tensor(p.lambda_bar, v), p, rng);
    EXPECT_NEAR(r.statistic, e_zero(0.5, 5, 4), 1e-8 * r.statistic);
    EXPECT_GT(r.statistic, r.threshold);
    EXPECT_EQ(r.verdict, Verdict::spiked);

    const auto z = detect_spectral(RealTensor(5), p, rng);
    EXPECT_EQ(z.statistic, 0.0);
    EXPECT_EQ(z.verdict, Verdict::unspiked);
    EXPECT_EQ(z.threshold, analytic_bounds(p).E_cut);
}

TEST(Projection, NoiselessInputPassesEveryProjector) {
    auto p = small_params(4, 8, 0.4);
    Rng rng(2);
    const auto v = sample_signal(4, rng);
    const auto T0 = rank_one_tensor(p.lambda_bar, v);
    const auto pair = decorrelate_with(T0, p.lambda_bar, effective_zeta(p), RealTensor(4));
    for (auto m : {ProjectorMethod::ritz, ProjectorMethod::chebyshev, ProjectorMethod::dense}) {
        DetectionConfig c;
        c.method = m;
        const auto f = filter_input_state(pair, p.n_bos, p, c);
        EXPECT_NEAR(f.symm_norm_sq, 1.0, 1e-10);
        EXPECT_NEAR(f.norm_sq, 1.0, 1e-8) << to_string(m);
        EXPECT_GE(f.norm_sq, p_threshold(p, c));
    }
}

TEST(Projection, UnspikedMatchesDenseSpectralWeight) {
    auto p = small_params(4, 4, 0.5);
    Rng rng(3);
    for (int t = 0; t < 3; ++t) {
        const auto T0 = spiked_tensor(p, rng, false);
        DetectionConfig c;
        Rng a(100 + t);
        const auto run = run_projection(T0, p, c, a);
        const auto psi = embed_power_state(build_basis(p.N, p.n_bos), run.pair.t_minus);
        const double s = psi.symm_norm * psi.symm_norm;
        const double hi = dense_weight(run.pair.t_plus, psi.state, run.filtered.e_upper) * s;
        const double lo = dense_weight(run.pair.t_plus, psi.state, run.filtered.e_lower) * s;
        EXPECT_GE(run.filtered.norm_sq, hi - 1e-6);
        EXPECT_LE(run.filtered.norm_sq, lo + 1e-6);
    }
}

TEST(Projection, GapDefaultsToRangeOverN) {
    auto p = small_params(4, 4, 0.5);
    Rng rng(4);
    const auto T0 = spiked_tensor(p, rng, true);
    DetectionConfig c;
    Rng a(7);
    const auto r = detect_projection(T0, p, c, a);
    EXPECT_NEAR(r.cutoff_energy, projection_cutoff(p, c), 1e-12);
    EXPECT_GT(r.cutoff_energy - r.lower_cutoff, 0.0);
    c.gap = 3.0;
    Rng b(7);
    const auto g = detect_projection(T0, p, c, b);
    EXPECT_NEAR(g.cutoff_energy - g.lower_cutoff, 3.0, 1e-12);
}

TEST(Projection, RequiresMultipleOfFourAndPositiveLambda) {
    Rng rng(5);
    auto p = small_params(4, 6, 0.5);
    EXPECT_THROW(detect_projection(RealTensor(4), p, {}, rng), InvalidParameter);
    p.n_bos = 4;
    p.lambda_bar = 0.0;
    EXPECT_THROW(detect_projection(RealTensor(4), p, {}, rng), InvalidParameter);
}

TEST(Projection, VerdictConsistency) {
    auto p = small_params(4, 4, 0.4);
    Rng rng(6);
    for (int t = 0; t < 6; ++t) {
        const auto T0 = spiked_tensor(p, rng, t % 2 == 0);
        Rng a(500 + t), b(500 + t), c(500 + t);
        const auto x = detect_projection(T0, p, {}, a);
        const auto y = simulate_quantum_unamplified(T0, p, {}, b);
        const auto z = simulate_quantum_amplified(T0, p, {}, c);
        EXPECT_NEAR(x.statistic, y.statistic, 1e-10);
        EXPECT_NEAR(x.statistic, z.statistic, 1e-10);
        EXPECT_EQ(x.verdict == Verdict::spiked, x.statistic >= x.threshold);
        EXPECT_EQ(x.threshold, p_threshold(p, DetectionConfig{}));
        Rng d(800 + t);
        const auto s = detect_spectral(T0, p, d);
        EXPECT_EQ(s.verdict == Verdict::spiked, s.statistic >= s.threshold);
    }
}

TEST(Quantum, AttemptsExamples) {
    Rng rng(7);
    EXPECT_EQ(attempts_until_success(1.0, 50, rng), 1u);
    EXPECT_EQ(attempts_until_success(0.0, 50, rng), 51u);
    EXPECT_EQ(unamplified_budget(20.0, 0.5), 40u);
    EXPECT_EQ(unamplified_budget(20.0, 0.0), std::numeric_limits<std::uint64_t>::max());
}

TEST(Quantum, BudgetedSuccessRate) {
    // P = P_> and budget ceil(c''/P_>): success 1 - (1 - P)^budget.
    for (double cpp : {1.0, 2.0}) {
        const double P = 0.1;
        const auto budget = unamplified_budget(cpp, P);
        const double want = 1.0 - std::pow(1.0 - P, static_cast<double>(budget));
        Rng rng(8);
        const int S = 2000;
        int hits = 0;
        for (int s = 0; s < S; ++s) hits += attempts_until_success(P, budget, rng) <= budget;
        const double sigma = std::sqrt(want * (1.0 - want) / S);
        EXPECT_NEAR(static_cast<double>(hits) / S, want, 3.0 * sigma) << cpp;
    }
}

TEST(Quantum, GeometricCostLaw) {
    for (double P : {0.02, 0.1}) {
        Rng rng(9);
        const int S = 2000;
        double sum = 0.0;
        for (int s = 0; s < S; ++s) sum += static_cast<double>(attempts_until_success(P, unamplified_budget(20.0, P), rng));
        const double mean = sum / S;
        EXPECT_LE(mean, 1.5 / P);
        EXPECT_GE(mean, 1.0 / (1.5 * P));
    }
}

TEST(Quantum, AmplificationRounds) {
    EXPECT_EQ(amplification_rounds(0.01), 8);
    EXPECT_EQ(amplification_rounds(0.01), static_cast<int>(std::ceil(std::numbers::pi / (4.0 * std::asin(0.1)))));
    EXPECT_EQ(amplification_rounds(1.0), 1);
    EXPECT_THROW(amplification_rounds(0.0), InvalidParameter);
    for (double P : {1e-6, 1e-4, 0.003, 0.01, 0.2, 0.5}) {
        const int r = amplification_rounds(P);
        EXPECT_LE(r, static_cast<int>(std::ceil(std::numbers::pi / 4.0 * std::sqrt(1.0 / P))) + 1);
    }
    EXPECT_EQ(amplified_probability(0.0, 8), 0.0);
}

TEST(Quantum, BoostedProbabilityAtTarget) {
    for (double P : {1e-4, 0.003, 0.01, 0.05}) {
        const double th = std::asin(std::sqrt(P));
        const int r = amplification_rounds(P);
        const double boosted = amplified_probability(P, r);
        EXPECT_NEAR(boosted, std::pow(std::sin((2 * r + 1) * th), 2), 1e-12);
        // Rounding the round count up overshoots pi/2 by less than 3 theta.
        EXPECT_GE(boosted, std::pow(std::cos(3.0 * th), 2));
        // The classic 1 - P guarantee belongs to the rounded-down count.
        const int rf = static_cast<int>(std::floor(std::numbers::pi / (4.0 * th)));
        EXPECT_GE(amplified_probability(P, rf), 1.0 - P);
    }
}

TEST(Quantum, SimulatorsOnNoiselessInstance) {
    auto p = small_params(4, 4, 0.6);
    Rng rng(10);
    const auto T0 = rank_one_tensor(p.lambda_bar, sample_signal(4, rng));
    Rng a(1), b(1);
    const auto u = simulate_quantum_unamplified(T0, p, {}, a);
    const auto m = simulate_quantum_amplified(T0, p, {}, b);
    EXPECT_EQ(u.trial_budget, unamplified_budget(20.0, u.threshold));
    EXPECT_GE(u.trials_used, 1u);
    EXPECT_EQ(m.amplification_rounds, amplification_rounds(m.threshold));
    EXPECT_NEAR(m.success_probability, amplified_probability(std::clamp(u.statistic, 0.0, 1.0), m.amplification_rounds), 1e-12);
}

TEST(Multistep, PlanExamples) {
    auto plan8 = multistep_plan(small_params(3, 8, 0.2), 1);
    EXPECT_EQ(plan8.nbos_per_level, (std::vector<std::vector<int>>{{8}, {4, 4}}));
    auto plan12 = multistep_plan(small_params(3, 12, 0.2), 1);
    EXPECT_EQ(plan12.nbos_per_level, (std::vector<std::vector<int>>{{12}, {8, 4}}));
    auto plan16 = multistep_plan(small_params(3, 16, 0.2), 2);
    EXPECT_EQ(plan16.nbos_per_level, (std::vector<std::vector<int>>{{16}, {8, 8}, {4, 4, 4, 4}}));
    auto plan20 = multistep_plan(small_params(3, 20, 0.2), 2);
    for (const auto& plan : {plan8, plan12, plan16, plan20}) {
        EXPECT_EQ(plan.leaf_total(), plan.nbos_per_level.front().front());
        for (std::size_t j = 0; j < plan.nbos_per_level.size(); ++j) {
            EXPECT_EQ(plan.nbos_per_level[j].size(), std::size_t{1} << j);
            for (std::size_t i = 0; i < plan.nbos_per_level[j].size(); ++i) {
                const int m = plan.nbos_per_level[j][i];
                EXPECT_EQ(m % 4, 0);
                EXPECT_DOUBLE_EQ(plan.cutoffs_per_level[j][i], projection_cutoff(small_params(3, 20, 0.2), {}, m));
                if (j > 0 && i % 2 == 1) {
                    EXPECT_LE(std::abs(m - plan.nbos_per_level[j][i - 1]), 4);
                }
            }
        }
    }
    EXPECT_THROW(multistep_plan(small_params(3, 4, 0.2), 1), InvalidParameter);
    EXPECT_THROW(multistep_plan(small_params(3, 8, 0.2), 2), InvalidParameter);
    EXPECT_THROW(multistep_plan(small_params(3, 6, 0.2), 0), InvalidParameter);
}

TEST(Multistep, ZeroLevelsReproducesProjection) {
    auto p = small_params(4, 4, 0.4);
    Rng rng(11);
    for (int t = 0; t < 3; ++t) {
        const auto T0 = spiked_tensor(p, rng, t != 1);
        Rng a(40 + t), b(40 + t);
        const auto d = detect_projection(T0, p, {}, a);
        const auto m = multistep_run(T0, p, multistep_plan(p, 0), {}, b);
        EXPECT_EQ(m.statistic, d.statistic);
        EXPECT_EQ(m.verdict, d.verdict);
        EXPECT_EQ(m.final_threshold, d.threshold);
    }
}

TEST(Multistep, NoiselessCascadePassesEveryLevel) {
    auto p = small_params(3, 8, 0.5);
    Rng rng(12);
    const auto T0 = rank_one_tensor(p.lambda_bar, sample_signal(3, rng));
    const auto pair = decorrelate_with(T0, p.lambda_bar, effective_zeta(p), RealTensor(3));
    const auto plan = multistep_plan(p, 1);
    std::vector<double> success(2, 1.0);
    std::uint64_t mv = 0;
    detail::run_cascade(pair, plan, 0, 0, p, {}, success, mv);
    EXPECT_NEAR(success[0], 1.0, 1e-8);
    EXPECT_NEAR(success[1], 1.0, 1e-8);
    EXPECT_GT(mv, 0u);
}

TEST(Multistep, ReportBookkeeping) {
    auto p = small_params(3, 8, 0.3);
    DetectionConfig c;
    c.q_trials = 2;
    const auto plan = multistep_plan(p, 1);
    Rng rng(13);
    for (int t = 0; t < 3; ++t) {
        const auto T0 = spiked_tensor(p, rng, true);
        Rng a(70 + t);
        const auto r = multistep_run(T0, p, plan, c, a);
        ASSERT_EQ(r.p_j.size(), 2u);
        for (double x : r.p_j) EXPECT_TRUE(x >= 0.0 && x <= 1.0 + 1e-12);
        for (double x : r.q_j) EXPECT_TRUE(x >= 0.0 && x <= 1.0 + 1e-12);
        EXPECT_NEAR(r.chain_lhs[0], r.p_j[0] * r.p_j[1] * r.p_j[1], 1e-14);
        EXPECT_EQ(r.inequality_holds[0], r.chain_lhs[0] <= r.q_j[0] * 1.15);
        EXPECT_NEAR(r.cost_estimate, std::sqrt(1.0 / r.p_greater) * std::sqrt(1.0 / r.q_j[1]), 1e-9 * r.cost_estimate);
        EXPECT_NEAR(r.final_threshold, r.p_greater / std::max(r.p_j[1] * r.p_j[1], std::numeric_limits<double>::min()),
                    1e-12 * r.final_threshold);
        EXPECT_EQ(r.verdict == Verdict::spiked, r.statistic >= r.final_threshold);
        EXPECT_EQ(r.p_greater, p_threshold(p, c));
    }
}

TEST(Exponents, RationalRatiosAndOrder) {
    auto p = small_params(20, 4, 0.02);
    const auto t = cost_exponents(p);
    ASSERT_EQ(t.entries.size(), 4u);
    const Rational one = t.entries[0].factor;
    EXPECT_EQ(t.entries[1].factor / one, (Rational{1, 2}));
    EXPECT_EQ(t.entries[2].factor / one, (Rational{1, 8}));
    EXPECT_EQ(t.entries[3].factor / one, (Rational{1, 12}));
    EXPECT_EQ(t.entries[2].factor, (t.entries[1].factor / Rational{4, 1}));
    for (std::size_t i = 1; i < t.entries.size(); ++i) {
        EXPECT_TRUE(t.entries[i].factor < t.entries[i - 1].factor);
        EXPECT_LT(t.entries[i].exponent, t.entries[i - 1].exponent);
    }
    EXPECT_EQ(t.nbos_eq, analytic_bounds(p).nbos_eq);
    EXPECT_DOUBLE_EQ(t.entries[0].exponent, t.nbos_eq);
    EXPECT_EQ((Rational{6, 4} / Rational{3, 1}), (Rational{1, 2}));
    EXPECT_EQ((Rational{1, 2} / Rational{-1, 3}), (Rational{-3, 2}));
}
