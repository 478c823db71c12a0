#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "fock.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "recovery.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace tpca {

inline constexpr const char* kToolVersion = "1.0.0";

enum class OutputFormat { json, csv };
enum class TensorFormat { json, binary };
enum class InstanceClasses { both, spiked, unspiked };

/// Effective configuration of one CLI run; echoed verbatim into every report.
struct RunConfig {
    std::string command;
    ModelParams params;
    DetectionConfig detection;
    RecoveryConfig recovery;
    std::string method = "spectral"; ///< spectral | projection | q-unamp | q-amp
    int k = 0;
    int trials = 1;
    InstanceClasses classes = InstanceClasses::both;
    bool unspiked = false;           ///< gen / recover: generate lambda = 0 instances
    std::string input;               ///< tensor file for detect / recover
    std::string state_input;         ///< recover: state snapshot to read the signal from
    std::string out;                 ///< empty: stdout
    OutputFormat format = OutputFormat::json;
    TensorFormat tensor_format = TensorFormat::json;
    std::vector<int> n_list;         ///< dos sweep over N
    std::vector<double> x_grid;      ///< dos thresholds as fractions of E_max
    EmaxReference emax_ref = EmaxReference::analytic;
    std::vector<std::string> logs;   ///< exponents: detect reports to read matvec counts from
    unsigned threads = 1;
    bool timing = false;

    void validate() const {
        params.validate();
        detection.validate();
        require(trials >= 1, "trials must be >= 1");
        require(k >= 0, "k must be >= 0");
        require(threads >= 1, "threads must be >= 1");
        require(detection.dense_limit >= 1, "dense-limit must be >= 1");
        require(params.N >= 2, "N must be >= 2");
        if (command == "detect") {
            require(method == "spectral" || method == "projection" || method == "q-unamp" || method == "q-amp",
                    "method must be one of spectral, projection, q-unamp, q-amp");
            require(k == 0 || method == "projection", "k > 0 requires method projection");
            if (method != "spectral") {
                params.validate_for_input_state();
                require(params.lambda_bar > 0.0, "projection methods require lambda > 0");
            }
        }
        if (command == "recover") {
            require(state_input.empty() || !input.empty(), "--state requires --in for the boosting tensor");
            if (!state_input.empty()) return;
            params.validate_for_input_state();
            require(params.lambda_bar > 0.0, "recover requires lambda > 0");
        }
        if (command == "dos") {
            require(!x_grid.empty(), "dos needs a nonempty x grid");
            for (int n : n_list) require(n >= 2, "dos: every N must be >= 2");
        }
        if (command == "gen") require(!out.empty(), "gen requires --out");
    }
};

inline std::string to_string(OutputFormat f) { return f == OutputFormat::json ? "json" : "csv"; }
inline std::string to_string(TensorFormat f) { return f == TensorFormat::json ? "json" : "binary"; }
inline std::string to_string(InstanceClasses c) {
    return c == InstanceClasses::both ? "both" : c == InstanceClasses::spiked ? "spiked" : "unspiked";
}
inline std::string to_string(EmaxReference r) { return r == EmaxReference::analytic ? "analytic" : "empirical"; }

inline Json detection_config_to_json(const DetectionConfig& c) {
    Json j;
    j["c_prime"] = c.c_prime;
    j["slack"] = c.slack;
    j["c_doubleprime"] = c.c_doubleprime;
    j["tol"] = c.tol;
    j["use_symmetrize"] = c.use_symmetrize;
    j["add_imaginary"] = c.add_imaginary;
    j["gap"] = c.gap;
    j["s_plus"] = c.s_plus;
    j["projector"] = to_string(c.method);
    j["max_iters"] = c.max_iters;
    j["dense_limit"] = c.dense_limit;
    j["q_trials"] = c.q_trials;
    j["chain_slack"] = c.chain_slack;
    return j;
}

inline Json run_config_to_json(const RunConfig& c) {
    Json j;
    j["command"] = c.command;
    j["params"] = params_to_json(c.params);
    j["detection"] = detection_config_to_json(c.detection);
    j["recovery"] = {{"mode", to_string(c.recovery.mode)},
                     {"boost_iters", c.recovery.boost_iters},
                     {"boost_tol", c.recovery.boost_tol},
                     {"boost_with_t_plus", c.recovery.boost_with_t_plus}};
    j["method"] = c.method;
    j["k"] = c.k;
    j["trials"] = c.trials;
    j["classes"] = to_string(c.classes);
    j["unspiked"] = c.unspiked;
    j["input"] = c.input;
    j["state_input"] = c.state_input;
    j["format"] = to_string(c.format);
    j["tensor_format"] = to_string(c.tensor_format);
    j["n_list"] = c.n_list;
    j["x_grid"] = c.x_grid;
    j["emax_ref"] = to_string(c.emax_ref);
    j["logs"] = c.logs;
    j["threads"] = c.threads;
    return j;
}

/// Deterministic instance for (seed sequence, class): signal and noise come
/// from separate derived streams.
inline TensorFile generate_instance(const ModelParams& params, bool spiked, const SeedSequence& seeds) {
    Rng rs = seeds.stream("signal");
    Rng rn = seeds.stream("noise");
    const Eigen::VectorXd v = sample_signal(params.N, rs);
    const RealTensor G = sample_gaussian_tensor<double>(params.N, rn, params.convention);
    const auto st = make_spiked(spiked ? params.lambda_bar : 0.0, v, G);
    TensorFile f;
    f.T = st.T;
    f.lambda = st.lambda;
    f.spiked = spiked && params.lambda_bar > 0.0;
    f.seed = seeds.seed();
    f.signal = v;
    f.params = params;
    return f;
}

namespace detail {

inline Json report_header(const RunConfig& cfg) {
    Json j;
    j["tool"] = "tpca";
    j["version"] = kToolVersion;
    j["command"] = cfg.command;
    j["seed"] = cfg.params.seed;
    j["config"] = run_config_to_json(cfg);
    return j;
}

inline std::string csv_header_line(const RunConfig& cfg) { return "# config: " + run_config_to_json(cfg).dump() + "\n"; }

inline Json error_record(const std::exception& e) {
    std::string type = "error";
    if (dynamic_cast<const CapacityError*>(&e)) type = "capacity";
    else if (dynamic_cast<const ConvergenceError*>(&e)) type = "convergence";
    else if (dynamic_cast<const InvalidParameter*>(&e)) type = "validation";
    return Json{{"type", type}, {"message", e.what()}};
}

inline std::string csv_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return format_double(x);
}

inline Json detection_to_json(const DetectionReport& r, bool timing) {
    Json j;
    j["algorithm"] = r.algorithm;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["verdict"] = to_string(r.verdict);
    j["cutoff_energy"] = r.cutoff_energy;
    j["lower_cutoff"] = r.lower_cutoff;
    j["symm_norm_sq"] = r.symm_norm_sq;
    j["success_probability"] = r.success_probability;
    j["query_counts"] = {{"trials_used", r.trials_used},
                         {"trial_budget", r.trial_budget},
                         {"amplification_rounds", r.amplification_rounds},
                         {"matvecs", r.matvecs}};
    j["projector"] = {{"method", to_string(r.projector.method)},
                      {"degree_or_iters", r.projector.degree_or_iters},
                      {"achieved_error", r.projector.achieved_error}};
    if (timing) j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

inline Json multistep_to_json(const MultistepReport& r, bool timing) {
    Json j;
    j["algorithm"] = "multistep";
    j["statistic"] = r.statistic;
    j["threshold"] = r.final_threshold;
    j["verdict"] = to_string(r.verdict);
    j["p_greater"] = r.p_greater;
    j["levels"] = r.plan.nbos_per_level;
    j["cutoffs"] = r.plan.cutoffs_per_level;
    j["p_j"] = r.p_j;
    j["q_j"] = r.q_j;
    j["chain_lhs"] = r.chain_lhs;
    j["inequality_slack"] = r.inequality_slack;
    std::vector<bool> holds(r.inequality_holds.begin(), r.inequality_holds.end());
    j["inequality_holds"] = holds;
    j["cost_estimate"] = r.cost_estimate;
    j["query_counts"] = {{"matvecs", r.matvecs}};
    if (timing) j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

inline DetectionReport run_detection(const std::string& method, const RealTensor& T, const ModelParams& params,
                                     const DetectionConfig& cfg, Rng& rng) {
    if (method == "spectral") return detect_spectral(T, params, rng);
    if (method == "projection") return detect_projection(T, params, cfg, rng);
    if (method == "q-unamp") return simulate_quantum_unamplified(T, params, cfg, rng);
    if (method == "q-amp") return simulate_quantum_amplified(T, params, cfg, rng);
    throw InvalidParameter("unknown method '" + method + "'");
}

// Fails early with a capacity error rather than once per trial.
inline void preflight_capacity(int N, int n_bos, std::size_t dense_limit, bool dense_only) {
    const auto basis = build_basis(N, n_bos);
    if (dense_only && basis->dim() > dense_limit)
        throw CapacityError("dimension " + std::to_string(basis->dim()) + " exceeds dense limit " + std::to_string(dense_limit));
}

} // namespace detail

/// gen: writes one instance; returns the written bytes.
inline std::string cmd_gen(const RunConfig& cfg) {
    cfg.validate();
    const bool spiked = !cfg.unspiked && cfg.params.lambda_bar > 0.0;
    const auto f = generate_instance(cfg.params, spiked, SeedSequence(cfg.params.seed).child(spiked ? "spiked" : "unspiked"));
    return cfg.tensor_format == TensorFormat::json ? tensor_to_json(f).dump(2) + "\n" : tensor_to_binary(f);
}

/// detect: one record per (trial, class), with ROC aggregates.
inline std::string cmd_detect(const RunConfig& cfg) {
    cfg.validate();
    struct Job {
        int trial;
        bool spiked;
    };
    std::vector<Job> jobs;
    std::optional<TensorFile> file;
    if (!cfg.input.empty()) {
        file = read_tensor_file(cfg.input);
        require(file->T.N() == cfg.params.N, "input tensor N does not match --N");
        jobs.push_back({0, file->spiked});
    } else {
        detail::preflight_capacity(cfg.params.N, cfg.params.n_bos, cfg.detection.dense_limit, false);
        for (int t = 0; t < cfg.trials; ++t) {
            if (cfg.classes != InstanceClasses::unspiked) jobs.push_back({t, true});
            if (cfg.classes != InstanceClasses::spiked) jobs.push_back({t, false});
        }
    }
    const SeedSequence root(cfg.params.seed);
    std::vector<Json> records(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        const auto& job = jobs[i];
        const SeedSequence ts = root.child(job.spiked ? "spiked" : "unspiked", static_cast<std::uint64_t>(job.trial));
        Json rec;
        rec["trial"] = job.trial;
        rec["truth"] = job.spiked ? "spiked" : "unspiked";
        rec["seed"] = ts.seed();
        try {
            const TensorFile inst = file ? *file : generate_instance(cfg.params, job.spiked, ts);
            rec["lambda"] = inst.lambda;
            Rng rng = file ? root.stream("algorithm") : ts.stream("algorithm");
            if (cfg.k > 0) {
                const auto plan = multistep_plan(cfg.params, cfg.k, cfg.detection);
                rec["result"] = detail::multistep_to_json(multistep_run(inst.T, cfg.params, plan, cfg.detection, rng), cfg.timing);
            } else {
                rec["result"] = detail::detection_to_json(detail::run_detection(cfg.method, inst.T, cfg.params, cfg.detection, rng),
                                                          cfg.timing);
            }
        } catch (const Error& e) {
            if (file) throw;
            rec["error"] = detail::error_record(e);
        }
        records[i] = std::move(rec);
    });

    int pos = 0, neg = 0, tp = 0, fp = 0, errors = 0;
    for (const auto& r : records) {
        if (r.contains("error")) {
            ++errors;
            continue;
        }
        const bool truth = r["truth"] == "spiked";
        const bool said = r["result"]["verdict"] == "spiked";
        (truth ? pos : neg)++;
        if (said) (truth ? tp : fp)++;
    }
    if (cfg.format == OutputFormat::csv) {
        std::string out = detail::csv_header_line(cfg) + "seed,trial,truth,lambda,verdict,statistic,threshold,error\n";
        for (const auto& r : records) {
            out += std::to_string(r["seed"].get<std::uint64_t>()) + "," + std::to_string(r["trial"].get<int>()) + "," +
                   r["truth"].get<std::string>() + ",";
            if (r.contains("error")) {
                out += ",,,," + r["error"]["type"].get<std::string>() + "\n";
                continue;
            }
            out += detail::csv_double(r["lambda"].get<double>()) + "," + r["result"]["verdict"].get<std::string>() + "," +
                   detail::csv_double(r["result"]["statistic"].get<double>()) + "," +
                   detail::csv_double(r["result"]["threshold"].get<double>()) + ",\n";
        }
        return out;
    }
    Json j = detail::report_header(cfg);
    j["records"] = records;
    j["aggregates"] = {{"spiked_trials", pos},
                       {"unspiked_trials", neg},
                       {"tpr", pos ? static_cast<double>(tp) / pos : 0.0},
                       {"fpr", neg ? static_cast<double>(fp) / neg : 0.0},
                       {"errors", errors}};
    return j.dump(2) + "\n";
}

/// dos: density-of-states tables across the N sweep.
inline std::string cmd_dos(const RunConfig& cfg) {
    cfg.validate();
    const std::vector<int> ns = cfg.n_list.empty() ? std::vector<int>{cfg.params.N} : cfg.n_list;
    std::vector<Json> tables;
    std::string csv = detail::csv_header_line(cfg) + "N,n_bos,x,p_greater,stderr,g_hat,g_hat_lower_bound,e_max_ref,trials,seed\n";
    for (int N : ns) {
        ModelParams p = cfg.params;
        p.N = N;
        Json t;
        t["N"] = N;
        t["n_bos"] = p.n_bos;
        try {
            const auto est = density_of_states(p, cfg.x_grid, cfg.trials, SeedSequence(cfg.params.seed).child("dos", static_cast<std::uint64_t>(N)),
                                               cfg.emax_ref, cfg.detection.dense_limit, cfg.threads);
            t["trials"] = est.trials;
            t["e_max_ref"] = est.e_max_ref;
            t["mean_lambda1"] = est.mean_lambda1();
            t["fraction_above_0.8_mean_lambda1"] = est.mean_fraction_at_least(0.8 * est.mean_lambda1());
            Json rows = Json::array();
            for (std::size_t i = 0; i < est.x_grid.size(); ++i) {
                const bool lb = est.g_hat_lower_bound[i];
                rows.push_back({{"x", est.x_grid[i]},
                                {"p_greater", est.p_greater[i]},
                                {"stderr", est.stderr_[i]},
                                {"g_hat", lb ? Json(nullptr) : Json(est.g_hat[i])},
                                {"g_hat_lower_bound", lb}});
                csv += std::to_string(N) + "," + std::to_string(p.n_bos) + "," + detail::csv_double(est.x_grid[i]) + "," +
                       detail::csv_double(est.p_greater[i]) + "," + detail::csv_double(est.stderr_[i]) + "," +
                       detail::csv_double(est.g_hat[i]) + "," + (lb ? "1" : "0") + "," + detail::csv_double(est.e_max_ref) +
                       "," + std::to_string(est.trials) + "," + std::to_string(est.seed) + "\n";
            }
            t["rows"] = rows;
        } catch (const Error& e) {
            t["error"] = detail::error_record(e);
            csv += std::to_string(N) + "," + std::to_string(p.n_bos) + ",,,,,,,,," + std::to_string(cfg.params.seed) + "\n";
        }
        tables.push_back(std::move(t));
    }
    if (cfg.format == OutputFormat::csv) return csv;
    Json j = detail::report_header(cfg);
    j["tables"] = tables;
    return j.dump(2) + "\n";
}

/// recover: detect -> project -> SPDM -> candidate -> boost per trial.
inline std::string cmd_recover(const RunConfig& cfg) {
    cfg.validate();
    std::optional<TensorFile> file;
    if (!cfg.input.empty()) {
        file = read_tensor_file(cfg.input);
        require(file->T.N() == cfg.params.N, "input tensor N does not match --N");
    } else {
        detail::preflight_capacity(cfg.params.N, cfg.params.n_bos, cfg.detection.dense_limit, false);
    }
    if (!cfg.state_input.empty()) {
        ComplexState state;
        try {
            state = state_from_json(Json::parse(read_file(cfg.state_input)));
        } catch (const Json::exception& e) {
            throw IoError("'" + cfg.state_input + "': " + e.what());
        }
        require(state.basis->N() == file->T.N(), "state and tensor mode counts differ");
        Rng rng = SeedSequence(cfg.params.seed).stream("algorithm");
        RecoveryReport r;
        recover_from_state(file->T, file->signal, state.normalized(), cfg.recovery, rng, r);
        Json j = detail::report_header(cfg);
        j["records"] = Json::array({Json{{"trial", 0},
                                         {"mode", to_string(cfg.recovery.mode)},
                                         {"corr_initial", r.corr_initial},
                                         {"corr_boosted", r.corr_boosted},
                                         {"iterations", r.iterations},
                                         {"candidate", std::vector<double>(r.candidate.data(), r.candidate.data() + r.candidate.size())},
                                         {"boosted", std::vector<double>(r.boosted.data(), r.boosted.data() + r.boosted.size())}}});
        return j.dump(2) + "\n";
    }
    const int n_trials = file ? 1 : cfg.trials;
    const SeedSequence root(cfg.params.seed);
    std::vector<Json> records(static_cast<std::size_t>(n_trials));
    parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
        const bool spiked = file ? file->spiked : !cfg.unspiked;
        const SeedSequence ts = root.child(spiked ? "spiked" : "unspiked", i);
        Json rec;
        rec["trial"] = i;
        rec["truth"] = spiked ? "spiked" : "unspiked";
        rec["seed"] = ts.seed();
        rec["mode"] = to_string(cfg.recovery.mode);
        try {
            const TensorFile inst = file ? *file : generate_instance(cfg.params, spiked, ts);
            Rng rng = file ? root.stream("algorithm") : ts.stream("algorithm");
            const auto r = recover_chain(inst.T, inst.signal, cfg.params, cfg.detection, cfg.recovery, rng);
            rec["detected"] = r.detected;
            rec["recovered"] = r.recovered;
            rec["statistic"] = r.detection.statistic;
            rec["threshold"] = r.detection.threshold;
            if (r.recovered) {
                rec["corr_initial"] = r.corr_initial;
                rec["corr_boosted"] = r.corr_boosted;
                rec["iterations"] = r.iterations;
            } else {
                rec["status"] = "detection-failed";
            }
        } catch (const Error& e) {
            if (file) throw;
            rec["error"] = detail::error_record(e);
        }
        records[i] = std::move(rec);
    });
    const double baseline = 4.0 / std::sqrt(static_cast<double>(cfg.params.N));
    int recovered = 0, above_baseline = 0, boosted_ok = 0;
    for (const auto& r : records) {
        if (!r.value("recovered", false)) continue;
        ++recovered;
        // An even-order spike fixes v_sig only up to sign.
        if (std::abs(r["corr_initial"].get<double>()) > baseline) ++above_baseline;
        if (std::abs(r["corr_boosted"].get<double>()) >= 0.9) ++boosted_ok;
    }
    if (cfg.format == OutputFormat::csv) {
        std::string out = detail::csv_header_line(cfg) + "seed,trial,truth,detected,recovered,corr_initial,corr_boosted,iterations\n";
        for (const auto& r : records) {
            out += std::to_string(r["seed"].get<std::uint64_t>()) + "," + std::to_string(r["trial"].get<std::size_t>()) + "," +
                   r["truth"].get<std::string>() + ",";
            if (r.contains("error")) {
                out += ",,,,\n";
                continue;
            }
            out += std::string(r["detected"].get<bool>() ? "1" : "0") + "," + (r["recovered"].get<bool>() ? "1" : "0") + ",";
            if (r["recovered"].get<bool>())
                out += detail::csv_double(r["corr_initial"].get<double>()) + "," + detail::csv_double(r["corr_boosted"].get<double>()) +
                       "," + std::to_string(r["iterations"].get<int>());
            else
                out += ",,";
            out += "\n";
        }
        return out;
    }
    Json j = detail::report_header(cfg);
    j["records"] = records;
    j["aggregates"] = {{"trials", n_trials},
                       {"recovered", recovered},
                       {"baseline", baseline},
                       {"fraction_abs_corr_initial_above_baseline", recovered ? static_cast<double>(above_baseline) / n_trials : 0.0},
                       {"fraction_abs_corr_boosted_ge_0.9", recovered ? static_cast<double>(boosted_ok) / n_trials : 0.0}};
    return j.dump(2) + "\n";
}

/// exponents: runtime exponent table, plus mean matvec counts per algorithm
/// read from detect reports.
inline std::string cmd_exponents(const RunConfig& cfg) {
    cfg.validate();
    auto table = cost_exponents(cfg.params);
    const std::map<std::string, std::string> algo_to_entry{{"spectral", "original_classical"},
                                                           {"projection", "accelerated_classical"},
                                                           {"q-amp", "quantum_amplified"},
                                                           {"multistep", "quantum_multistep"}};
    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& path : cfg.logs) {
        Json log;
        try {
            log = Json::parse(read_file(path));
        } catch (const Json::exception& e) {
            throw IoError("'" + path + "': " + e.what());
        }
        for (const auto& r : log.value("records", Json::array())) {
            if (!r.contains("result")) continue;
            const auto it = algo_to_entry.find(r["result"].value("algorithm", std::string{}));
            if (it == algo_to_entry.end()) continue;
            auto& s = sums[it->second];
            s.first += r["result"]["query_counts"].value("matvecs", 0.0);
            s.second += 1;
        }
    }
    if (cfg.format == OutputFormat::csv) {
        std::string out = detail::csv_header_line(cfg) + "algorithm,factor_num,factor_den,exponent,ratio_to_original,mean_matvecs\n";
        for (const auto& e : table.entries) {
            const auto s = sums.find(e.algorithm);
            const Rational ratio = e.factor / table.entries.front().factor;
            out += e.algorithm + "," + std::to_string(e.factor.num) + "," + std::to_string(e.factor.den) + "," +
                   detail::csv_double(e.exponent) + "," + std::to_string(ratio.num) + "/" + std::to_string(ratio.den) + "," +
                   (s == sums.end() ? std::string{} : detail::csv_double(s->second.first / s->second.second)) + "\n";
        }
        return out;
    }
    Json j = detail::report_header(cfg);
    j["nbos_eq"] = table.nbos_eq;
    j["nbos_eq_bracketed"] = table.nbos_eq_bracketed;
    Json entries = Json::array();
    for (const auto& e : table.entries) {
        const Rational ratio = e.factor / table.entries.front().factor;
        Json row{{"algorithm", e.algorithm},
                 {"factor", std::to_string(e.factor.num) + "/" + std::to_string(e.factor.den)},
                 {"exponent", e.exponent},
                 {"ratio_to_original", std::to_string(ratio.num) + "/" + std::to_string(ratio.den)}};
        const auto s = sums.find(e.algorithm);
        if (s != sums.end()) row["mean_matvecs"] = s->second.first / s->second.second;
        entries.push_back(std::move(row));
    }
    j["entries"] = entries;
    return j.dump(2) + "\n";
}

/// Dispatches cfg.command and writes the result to cfg.out (or `os`).
inline void run_command(const RunConfig& cfg, std::ostream& os) {
    std::string out;
    if (cfg.command == "gen") out = cmd_gen(cfg);
    else if (cfg.command == "detect") out = cmd_detect(cfg);
    else if (cfg.command == "dos") out = cmd_dos(cfg);
    else if (cfg.command == "recover") out = cmd_recover(cfg);
    else if (cfg.command == "exponents") out = cmd_exponents(cfg);
    else throw InvalidParameter("unknown command '" + cfg.command + "'");
    if (cfg.out.empty()) os << out;
    else write_file(cfg.out, out);
}

} // namespace tpca
