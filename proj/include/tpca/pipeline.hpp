#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "fock.hpp"
#include "hamiltonian.hpp"
#include "instance.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace tpca {

struct DetectionConfig {
    double c_prime = 0.2;       ///< cutoff slack below the ideal-state energy
    double slack = 10.0;        ///< divisor applied to the P_> overlap estimate
    double c_doubleprime = 20.0;///< unamplified retry budget multiplier
    double tol = 1e-8;          ///< projector tolerance
    bool use_symmetrize = true; ///< count the symmetric-subspace projection loss in norm^2
    bool add_imaginary = false; ///< complex-ensemble noise on the input-state tensor
    double gap = 0.0;           ///< e_upper - e_lower; 0 selects (spectral range) / N
    double s_plus = 0.0;        ///< noise norm^2 / N^4 of the input tensor; 0 derives it
    ProjectorMethod method = ProjectorMethod::ritz;
    int max_iters = 2000;
    std::size_t dense_limit = kDefaultDenseLimit;
    int q_trials = 8;           ///< unspiked draws per level for Q(j)
    double chain_slack = 0.15;  ///< statistical slack on the multistep chain inequality

    void validate() const {
        require(c_prime >= 0.0 && c_prime < 1.0, "c_prime must be in [0, 1)");
        require(slack >= 1.0, "slack must be >= 1");
        require(c_doubleprime >= 1.0, "c_doubleprime must be >= 1");
        require(tol > 0.0 && tol < 1.0, "tol must be in (0, 1)");
        require(gap >= 0.0, "gap must be nonnegative");
        require(s_plus >= 0.0, "s_plus must be nonnegative");
        require(max_iters >= 1, "max_iters must be >= 1");
        require(q_trials >= 1, "q_trials must be >= 1");
        require(chain_slack >= 0.0, "chain_slack must be nonnegative");
    }
};

enum class Verdict { spiked, unspiked };

inline std::string to_string(Verdict v) { return v == Verdict::spiked ? "spiked" : "unspiked"; }

struct DetectionReport {
    std::string algorithm;
    Verdict verdict = Verdict::unspiked;
    double statistic = 0.0;     ///< lambda_1, or projection norm^2
    double threshold = 0.0;     ///< E_cut, or P_>
    double cutoff_energy = 0.0; ///< upper projector cutoff (0 for the spectral algorithm)
    double lower_cutoff = 0.0;
    double symm_norm_sq = 1.0;  ///< symmetric-subspace weight of the input state
    double success_probability = 0.0; ///< per-attempt probability used by the quantum models
    std::uint64_t trials_used = 0;
    std::uint64_t trial_budget = 0;
    int amplification_rounds = 0;
    std::uint64_t matvecs = 0;
    double wall_time_ms = 0.0;
    ApproxProjector projector;
    ModelParams params;
    DetectionConfig config;
};

/// (1 - c') lambda^+ N^2 n (n - 1)
inline double projection_cutoff(const ModelParams& params, const DetectionConfig& cfg, int n_bos) {
    require(params.p == 4, "projection_cutoff: p must be 4");
    const double lp = lambda_plus(params.lambda_bar, effective_zeta(params));
    return (1.0 - cfg.c_prime) * lp * static_cast<double>(params.N) * params.N * n_bos * (n_bos - 1.0);
}

inline double projection_cutoff(const ModelParams& params, const DetectionConfig& cfg) {
    return projection_cutoff(params, cfg, params.n_bos);
}

inline double default_s_plus(const ModelParams& params, const DetectionConfig& cfg) {
    if (cfg.s_plus > 0.0) return cfg.s_plus;
    const double s = noise_norm_per_entry(params.N, params.convention);
    return cfg.add_imaginary ? 2.0 * s : s;
}

/// P_> = (1/slack) [ (l^-)^2 N^4 / ((l^-)^2 N^4 + s^+ N^4) ]^{n/4}
inline double p_threshold(double lambda_minus_bar, int N, int n_bos, double s_plus, double slack) {
    require(n_bos % 4 == 0, "p_threshold: n_bos must be a multiple of 4");
    require(slack >= 1.0, "p_threshold: slack must be >= 1");
    const double n4 = std::pow(static_cast<double>(N), 4);
    const double sig = lambda_minus_bar * lambda_minus_bar * n4;
    if (sig == 0.0) return 0.0;
    return std::pow(sig / (sig + s_plus * n4), n_bos / 4.0) / slack;
}

inline double p_threshold(const ModelParams& params, const DetectionConfig& cfg, int n_bos) {
    const double lm = lambda_minus(params.lambda_bar, effective_zeta(params));
    return p_threshold(lm, params.N, n_bos, default_s_plus(params, cfg), cfg.slack);
}

inline double p_threshold(const ModelParams& params, const DetectionConfig& cfg) {
    return p_threshold(params, cfg, params.n_bos);
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline ProjectorOptions projector_options(const DetectionConfig& cfg) {
    ProjectorOptions o;
    o.method = cfg.method;
    o.tol = cfg.tol;
    o.max_iters = cfg.max_iters;
    o.dense_limit = cfg.dense_limit;
    return o;
}

} // namespace detail

/// Filtered input state for one boson count: the approximate projection of the
/// normalized symmetrized power of |T^->, and its success weight.
struct FilteredState {
    ComplexState state;      ///< projected (unnormalized) state
    double norm_sq = 0.0;    ///< success probability including symmetrization if enabled
    double symm_norm_sq = 1.0;
    double projected_norm_sq = 0.0;
    double e_lower = 0.0;
    double e_upper = 0.0;
    ApproxProjector projector;
    std::uint64_t matvecs = 0;
};

/// Projects `input` (normalized) with H(T^+) on its basis at the cutoff for
/// that basis size.
inline FilteredState filter_state(const RealTensor& t_plus, const ComplexState& input, double symm_norm_sq,
                                  const ModelParams& params, const DetectionConfig& cfg) {
    const int n = input.basis->n_bos();
    FilteredState out;
    out.e_upper = projection_cutoff(params, cfg, n);
    require(out.e_upper > 0.0, "projection requires lambda_bar > 0");
    HamiltonianOperator H(t_plus, input.basis);
    double gap = cfg.gap;
    if (gap == 0.0) {
        // Fixed-seed start so the cutoffs do not depend on the caller's stream.
        Rng bounds_rng(0x9e3779b97f4a7c15ULL);
        const auto [lo, hi] = spectral_bounds(H, bounds_rng);
        gap = (hi - lo) / params.N;
    }
    out.e_lower = out.e_upper - gap;
    auto pr = project_above(H, input.amps, out.e_lower, out.e_upper, detail::projector_options(cfg));
    out.state = ComplexState(input.basis, std::move(pr.projected));
    out.projected_norm_sq = pr.norm_sq;
    out.symm_norm_sq = cfg.use_symmetrize ? symm_norm_sq : 1.0;
    out.norm_sq = out.projected_norm_sq * out.symm_norm_sq;
    out.projector = pr.projector;
    out.matvecs = H.matvec_count();
    return out;
}

/// Psi_input on n_bos bosons, filtered at that size.
inline FilteredState filter_input_state(const DecorrelatedPair& pair, int n_bos, const ModelParams& params,
                                        const DetectionConfig& cfg) {
    auto basis = build_basis(params.N, n_bos);
    auto emb = embed_power_state(basis, pair.t_minus);
    return filter_state(pair.t_plus, emb.state, emb.symm_norm * emb.symm_norm, params, cfg);
}

/// Common front half of the projection-based algorithms: decorrelate T0
/// (consuming rng), build Psi_input, project with H(T^+).
struct ProjectionRun {
    DecorrelatedPair pair;
    FilteredState filtered;
};

inline ProjectionRun run_projection(const RealTensor& T0, const ModelParams& params, const DetectionConfig& cfg, Rng& rng) {
    params.validate_for_input_state();
    cfg.validate();
    require(T0.N() == params.N, "detection: tensor mode count does not match N");
    require(params.lambda_bar > 0.0, "projection algorithms require lambda_bar > 0");
    ProjectionRun run;
    run.pair = decorrelate(T0, params.lambda_bar, effective_zeta(params), cfg.add_imaginary, rng, params.convention);
    run.filtered = filter_input_state(run.pair, params.n_bos, params, cfg);
    return run;
}

inline DetectionReport make_projection_report(std::string algorithm, const ProjectionRun& run, const ModelParams& params,
                                              const DetectionConfig& cfg) {
    DetectionReport r;
    r.algorithm = std::move(algorithm);
    r.statistic = run.filtered.norm_sq;
    r.threshold = p_threshold(params, cfg);
    r.cutoff_energy = run.filtered.e_upper;
    r.lower_cutoff = run.filtered.e_lower;
    r.symm_norm_sq = run.filtered.symm_norm_sq;
    r.success_probability = std::clamp(run.filtered.norm_sq, 0.0, 1.0);
    r.matvecs = run.filtered.matvecs;
    r.projector = run.filtered.projector;
    r.params = params;
    r.config = cfg;
    return r;
}

/// Leading eigenvalue of H(T0) against E_cut.
inline DetectionReport detect_spectral(const RealTensor& T0, const ModelParams& params, Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    params.validate();
    require(T0.N() == params.N, "detect_spectral: tensor mode count does not match N");
    HamiltonianOperator H(T0, build_basis(params.N, params.n_bos));
    const auto le = leading_eigenvalue(H, rng);
    const auto b = analytic_bounds(params);
    DetectionReport r;
    r.algorithm = "spectral";
    r.statistic = le.value;
    r.threshold = b.E_cut;
    r.verdict = r.statistic >= r.threshold ? Verdict::spiked : Verdict::unspiked;
    r.trials_used = 1;
    r.matvecs = H.matvec_count();
    r.params = params;
    r.projector.degree_or_iters = le.iterations;
    r.projector.achieved_error = le.residual;
    r.wall_time_ms = detail::elapsed_ms(t0);
    return r;
}

/// Projected norm^2 of Psi_input against P_>.
inline DetectionReport detect_projection(const RealTensor& T0, const ModelParams& params, const DetectionConfig& cfg, Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_projection(T0, params, cfg, rng);
    auto r = make_projection_report("projection", run, params, cfg);
    r.verdict = r.statistic >= r.threshold ? Verdict::spiked : Verdict::unspiked;
    r.trials_used = 1;
    r.trial_budget = 1;
    r.wall_time_ms = detail::elapsed_ms(t0);
    return r;
}

inline std::uint64_t unamplified_budget(double c_doubleprime, double p_target) {
    if (p_target <= 0.0) return std::numeric_limits<std::uint64_t>::max();
    const double b = std::ceil(c_doubleprime / p_target);
    return b >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(b);
}

/// Number of Bernoulli(p) attempts up to and including the first success,
/// capped at `budget`; returns budget + 1 when every attempt failed.
inline std::uint64_t attempts_until_success(double p, std::uint64_t budget, Rng& rng) {
    if (p <= 0.0) return budget == std::numeric_limits<std::uint64_t>::max() ? budget : budget + 1;
    if (p >= 1.0) return 1;
    std::geometric_distribution<std::uint64_t> geo(p);
    const std::uint64_t failures = geo(rng);
    return failures >= budget ? (budget == std::numeric_limits<std::uint64_t>::max() ? budget : budget + 1) : failures + 1;
}

/// Repeat the projection up to ceil(c''/P_>) times, each succeeding with
/// probability norm^2.
inline DetectionReport simulate_quantum_unamplified(const RealTensor& T0, const ModelParams& params, const DetectionConfig& cfg,
                                                    Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_projection(T0, params, cfg, rng);
    auto r = make_projection_report("q-unamp", run, params, cfg);
    r.trial_budget = unamplified_budget(cfg.c_doubleprime, r.threshold);
    const std::uint64_t a = attempts_until_success(r.success_probability, r.trial_budget, rng);
    const bool success = a <= r.trial_budget;
    r.trials_used = success ? a : r.trial_budget;
    r.verdict = success ? Verdict::spiked : Verdict::unspiked;
    r.wall_time_ms = detail::elapsed_ms(t0);
    return r;
}

/// Grover rounds ceil(pi / (4 asin sqrt(p_target))).
inline int amplification_rounds(double p_target) {
    require(p_target > 0.0 && p_target <= 1.0, "amplification_rounds: p_target must be in (0, 1]");
    return static_cast<int>(std::ceil(std::numbers::pi / (4.0 * std::asin(std::sqrt(p_target)))));
}

/// sin^2((2r + 1) asin sqrt(p))
inline double amplified_probability(double p, int rounds) {
    require(p >= 0.0 && p <= 1.0, "amplified_probability: p must be in [0, 1]");
    const double s = std::sin((2.0 * rounds + 1.0) * std::asin(std::sqrt(p)));
    return s * s;
}

/// Amplitude amplification tuned to P_>, then a single measurement.
inline DetectionReport simulate_quantum_amplified(const RealTensor& T0, const ModelParams& params, const DetectionConfig& cfg,
                                                  Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_projection(T0, params, cfg, rng);
    auto r = make_projection_report("q-amp", run, params, cfg);
    r.amplification_rounds = amplification_rounds(r.threshold);
    const double boosted = amplified_probability(r.success_probability, r.amplification_rounds);
    std::bernoulli_distribution coin(boosted);
    r.verdict = coin(rng) ? Verdict::spiked : Verdict::unspiked;
    r.success_probability = boosted;
    r.trials_used = 1;
    r.trial_budget = 1;
    r.wall_time_ms = detail::elapsed_ms(t0);
    return r;
}

struct MultistepPlan {
    int k = 0;
    std::vector<std::vector<int>> nbos_per_level;    ///< level j lists its 2^j subsystem sizes
    std::vector<std::vector<double>> cutoffs_per_level;

    int leaf_total() const { return std::accumulate(nbos_per_level.back().begin(), nbos_per_level.back().end(), 0); }
};

/// Halves each subsystem k times; an odd number of 4-boson blocks is split
/// with the larger half first.
inline MultistepPlan multistep_plan(const ModelParams& params, int k, const DetectionConfig& cfg = {}) {
    params.validate_for_input_state();
    require(k >= 0, "multistep_plan: k must be >= 0");
    MultistepPlan plan;
    plan.k = k;
    plan.nbos_per_level.push_back({params.n_bos});
    for (int j = 0; j < k; ++j) {
        std::vector<int> next;
        for (int m : plan.nbos_per_level.back()) {
            const int blocks = m / 4;
            require(blocks >= 2, "multistep_plan: subsystem too small to split into 4-boson halves");
            next.push_back(4 * ((blocks + 1) / 2));
            next.push_back(4 * (blocks / 2));
        }
        plan.nbos_per_level.push_back(std::move(next));
    }
    for (const auto& level : plan.nbos_per_level) {
        std::vector<double> c;
        for (int m : level) c.push_back(params.lambda_bar > 0.0 ? projection_cutoff(params, cfg, m) : 0.0);
        plan.cutoffs_per_level.push_back(std::move(c));
    }
    return plan;
}

struct MultistepReport {
    std::vector<double> p_j;             ///< P(j), j = 0..k
    std::vector<double> q_j;             ///< Q(j), j = 0..k
    std::vector<double> chain_lhs;       ///< P(j) P(j+1)^2 ... P(k)^{2^{k-j}}
    std::vector<double> inequality_slack;///< chain_lhs / Q(j)
    std::vector<bool> inequality_holds;  ///< chain_lhs <= Q(j) (1 + chain_slack)
    double final_threshold = 0.0;        ///< P_> / prod_{j>=1} P(j)^{2^j}
    double p_greater = 0.0;
    double cost_estimate = 0.0;          ///< sqrt(1/P_>) prod_{j>=1} sqrt(1/Q(j))
    double statistic = 0.0;              ///< P(0)
    Verdict verdict = Verdict::unspiked;
    std::uint64_t matvecs = 0;
    double wall_time_ms = 0.0;
    MultistepPlan plan;
};

namespace detail {

struct CascadeNode {
    ComplexState state; // normalized surviving state
    double success = 1.0;
};

// Builds the subsystem rooted at (level, index) bottom-up; success[j] gets
// the product of projection successes of all level-j nodes in this subtree.
inline CascadeNode run_cascade(const DecorrelatedPair& pair, const MultistepPlan& plan, int level, std::size_t index,
                               const ModelParams& params, const DetectionConfig& cfg, std::vector<double>& success,
                               std::uint64_t& matvecs) {
    const int n = plan.nbos_per_level[static_cast<std::size_t>(level)][index];
    auto basis = build_basis(params.N, n);
    ComplexState input;
    double symm_sq = 1.0;
    if (level == plan.k) {
        auto emb = embed_power_state(basis, pair.t_minus);
        input = std::move(emb.state);
        symm_sq = emb.symm_norm * emb.symm_norm;
    } else {
        auto a = run_cascade(pair, plan, level + 1, 2 * index, params, cfg, success, matvecs);
        auto b = run_cascade(pair, plan, level + 1, 2 * index + 1, params, cfg, success, matvecs);
        if (a.state.norm() == 0.0 || b.state.norm() == 0.0) {
            success[static_cast<std::size_t>(level)] = 0.0;
            return {ComplexState(basis), 0.0};
        }
        input = symmetrized_product(a.state, b.state, basis);
        symm_sq = input.norm_sq();
        input = input.normalized();
    }
    auto f = filter_state(pair.t_plus, input, symm_sq, params, cfg);
    matvecs += f.matvecs;
    success[static_cast<std::size_t>(level)] *= f.norm_sq;
    CascadeNode node{std::move(f.state), f.norm_sq};
    if (node.state.norm() > 0.0) node.state = node.state.normalized();
    return node;
}

} // namespace detail

/// Unconditioned success of the level projector on Psi_input at n_bos,
/// averaged over fresh unspiked draws.
inline double measure_q(int n_bos, const ModelParams& params, const DetectionConfig& cfg, Rng& rng, std::uint64_t* matvecs = nullptr) {
    double s = 0.0;
    for (int t = 0; t < cfg.q_trials; ++t) {
        const RealTensor G = sample_gaussian_tensor<double>(params.N, rng, params.convention);
        const auto pair = decorrelate(G, params.lambda_bar, effective_zeta(params), cfg.add_imaginary, rng, params.convention);
        const auto f = filter_input_state(pair, n_bos, params, cfg);
        if (matvecs) *matvecs += f.matvecs;
        s += f.norm_sq;
    }
    return s / cfg.q_trials;
}

/// Bottom-up cascade of symmetrized products and level projections.
inline MultistepReport multistep_run(const RealTensor& T0, const ModelParams& params, const MultistepPlan& plan,
                                     const DetectionConfig& cfg, Rng& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    require(!plan.nbos_per_level.empty() && plan.nbos_per_level.front().front() == params.n_bos,
            "multistep_run: plan does not match n_bos");
    MultistepReport rep;
    rep.plan = plan;
    const int k = plan.k;
    std::vector<double> success(static_cast<std::size_t>(k + 1), 1.0);
    if (k == 0) {
        const auto run = run_projection(T0, params, cfg, rng);
        success[0] = run.filtered.norm_sq;
        rep.matvecs = run.filtered.matvecs;
    } else {
        params.validate_for_input_state();
        cfg.validate();
        require(T0.N() == params.N, "multistep_run: tensor mode count does not match N");
        require(params.lambda_bar > 0.0, "projection algorithms require lambda_bar > 0");
        const auto pair = decorrelate(T0, params.lambda_bar, effective_zeta(params), cfg.add_imaginary, rng, params.convention);
        detail::run_cascade(pair, plan, 0, 0, params, cfg, success, rep.matvecs);
    }
    for (int j = 0; j <= k; ++j) rep.p_j.push_back(std::pow(success[static_cast<std::size_t>(j)], 1.0 / std::ldexp(1.0, j)));
    for (int j = 0; j <= k; ++j)
        rep.q_j.push_back(measure_q(plan.nbos_per_level[static_cast<std::size_t>(j)].front(), params, cfg, rng, &rep.matvecs));
    for (int j = 0; j <= k; ++j) {
        double lhs = 1.0;
        for (int i = j; i <= k; ++i) lhs *= std::pow(rep.p_j[static_cast<std::size_t>(i)], std::ldexp(1.0, i - j));
        rep.chain_lhs.push_back(lhs);
        const double q = rep.q_j[static_cast<std::size_t>(j)];
        rep.inequality_slack.push_back(q > 0.0 ? lhs / q : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
        rep.inequality_holds.push_back(lhs <= q * (1.0 + cfg.chain_slack));
    }
    rep.p_greater = p_threshold(params, cfg);
    double prior = 1.0;
    for (int j = 1; j <= k; ++j) prior *= std::pow(rep.p_j[static_cast<std::size_t>(j)], std::ldexp(1.0, j));
    rep.final_threshold = rep.p_greater / std::max(prior, std::numeric_limits<double>::min());
    double cost = std::sqrt(1.0 / rep.p_greater);
    for (int j = 1; j <= k; ++j) cost *= std::sqrt(1.0 / rep.q_j[static_cast<std::size_t>(j)]);
    rep.cost_estimate = cost;
    rep.statistic = rep.p_j[0];
    rep.verdict = rep.statistic >= rep.final_threshold ? Verdict::spiked : Verdict::unspiked;
    rep.wall_time_ms = detail::elapsed_ms(t0);
    return rep;
}

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend Rational operator/(Rational a, Rational b) {
        Rational r{a.num * b.den, a.den * b.num};
        if (r.den < 0) r = {-r.num, -r.den};
        const auto g = std::gcd(r.num, r.den);
        return {r.num / g, r.den / g};
    }
    friend bool operator==(const Rational&, const Rational&) = default;
    friend bool operator<(Rational a, Rational b) { return a.num * b.den < b.num * a.den; }
};

struct CostExponentEntry {
    std::string algorithm;
    Rational factor;        ///< runtime ~ N^{factor * nbos_eq}
    double exponent = 0.0;  ///< factor * nbos_eq
    std::uint64_t measured_matvecs = 0;
};

struct CostExponentTable {
    double nbos_eq = 0.0;
    bool nbos_eq_bracketed = true;
    std::vector<CostExponentEntry> entries;
};

/// Runtime exponents in base N relative to nbos_eq.
inline CostExponentTable cost_exponents(const ModelParams& params) {
    const auto b = analytic_bounds(params);
    CostExponentTable t;
    t.nbos_eq = b.nbos_eq;
    t.nbos_eq_bracketed = b.nbos_eq_bracketed;
    for (const auto& [name, f] : {std::pair{"original_classical", Rational{1, 1}}, std::pair{"accelerated_classical", Rational{1, 2}},
                                  std::pair{"quantum_amplified", Rational{1, 8}}, std::pair{"quantum_multistep", Rational{1, 12}}})
        t.entries.push_back({name, f, f.value() * b.nbos_eq, 0});
    return t;
}

} // namespace tpca
