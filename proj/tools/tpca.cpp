#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "tpca/commands.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitConvergence = 4;
constexpr int kExitOther = 1;

void add_model_flags(CLI::App& app, tpca::RunConfig& cfg) {
    app.add_option("--N", cfg.params.N, "number of modes")->check(CLI::PositiveNumber);
    app.add_option("--nbos", cfg.params.n_bos, "number of bosons")->check(CLI::PositiveNumber);
    app.add_option("--p", cfg.params.p, "tensor order (only 4)");
    app.add_option("--lambda", cfg.params.lambda_bar, "signal strength lambda_bar");
    app.add_option("--zeta", cfg.params.zeta, "decorrelation strength (default 1/ln N)");
    app.add_option("--seed", cfg.params.seed, "root seed");
    app.add_option("--ensemble", cfg.params.ensemble, "real | complex")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::Ensemble>{{"real", tpca::Ensemble::real},
                                                                                 {"complex", tpca::Ensemble::complex}}));
    app.add_option("--convention", cfg.params.convention, "noise variance convention: average | unit_distinct")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::VarianceConvention>{
            {"average", tpca::VarianceConvention::average}, {"unit_distinct", tpca::VarianceConvention::unit_distinct}}));
    app.add_option("--out", cfg.out, "output path (default stdout)");
    app.add_option("--threads", cfg.threads, "worker threads for trial sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--timing", cfg.timing, "include wall-clock times (reports are then not reproducible)");
}

void add_report_format(CLI::App& app, tpca::RunConfig& cfg) {
    app.add_option("--format", cfg.format, "json | csv")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, tpca::OutputFormat>{{"json", tpca::OutputFormat::json}, {"csv", tpca::OutputFormat::csv}}));
}

void add_detection_flags(CLI::App& app, tpca::RunConfig& cfg) {
    app.add_option("--trials", cfg.trials, "number of trials")->check(CLI::PositiveNumber);
    app.add_option("--cprime", cfg.detection.c_prime, "projection cutoff slack c'");
    app.add_option("--slack", cfg.detection.slack, "P_> safety divisor");
    app.add_option("--cdoubleprime", cfg.detection.c_doubleprime, "unamplified retry multiplier");
    app.add_option("--tol", cfg.detection.tol, "projector tolerance");
    app.add_option("--gap", cfg.detection.gap, "gap between projector cutoffs (0: spectral range / N)");
    app.add_option("--s-plus", cfg.detection.s_plus, "input-tensor noise norm^2 / N^4 (0 derives it)");
    app.add_option("--projector", cfg.detection.method, "ritz | chebyshev | dense")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::ProjectorMethod>{
            {"ritz", tpca::ProjectorMethod::ritz},
            {"chebyshev", tpca::ProjectorMethod::chebyshev},
            {"dense", tpca::ProjectorMethod::dense}}));
    app.add_option("--dense-limit", cfg.detection.dense_limit, "largest dimension handled densely");
    app.add_option("--max-iters", cfg.detection.max_iters, "Krylov iteration cap of the Ritz projector");
    app.add_flag("--add-imaginary", cfg.detection.add_imaginary, "complex noise on the input-state tensor");
    app.add_flag("!--no-symmetrize", cfg.detection.use_symmetrize, "exclude the symmetrization loss from norm^2");
    app.add_option("--in", cfg.input, "tensor file to analyse instead of generated instances");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral tensor-PCA laboratory"};
    app.require_subcommand(1);
    tpca::RunConfig cfg;

    auto* gen = app.add_subcommand("gen", "write a spiked or unspiked instance");
    add_model_flags(*gen, cfg);
    gen->add_flag("--unspiked", cfg.unspiked, "lambda = 0");
    gen->add_option("--format", cfg.tensor_format, "json | binary")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::TensorFormat>{{"json", tpca::TensorFormat::json},
                                                                                      {"binary", tpca::TensorFormat::binary}}));

    auto* detect = app.add_subcommand("detect", "run a detection algorithm over trials");
    add_model_flags(*detect, cfg);
    add_report_format(*detect, cfg);
    add_detection_flags(*detect, cfg);
    detect->add_option("--method", cfg.method, "spectral | projection | q-unamp | q-amp");
    detect->add_option("--k", cfg.k, "multistep levels (projection only)");
    detect->add_option("--q-trials", cfg.detection.q_trials, "unspiked draws per level for Q(j)");
    detect->add_option("--classes", cfg.classes, "both | spiked | unspiked")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::InstanceClasses>{
            {"both", tpca::InstanceClasses::both},
            {"spiked", tpca::InstanceClasses::spiked},
            {"unspiked", tpca::InstanceClasses::unspiked}}));

    auto* dos = app.add_subcommand("dos", "density of states of unspiked Hamiltonians");
    add_model_flags(*dos, cfg);
    add_report_format(*dos, cfg);
    dos->add_option("--trials", cfg.trials, "draws per N")->check(CLI::PositiveNumber);
    dos->add_option("--N-list", cfg.n_list, "sweep over N (comma separated)")->delimiter(',');
    dos->add_option("--x-grid", cfg.x_grid, "thresholds as fractions of E_max (comma separated)")->delimiter(',');
    dos->add_option("--dense-limit", cfg.detection.dense_limit, "largest dimension handled densely");
    dos->add_option("--emax", cfg.emax_ref, "analytic | empirical")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::EmaxReference>{
            {"analytic", tpca::EmaxReference::analytic}, {"empirical", tpca::EmaxReference::empirical}}));

    auto* recover = app.add_subcommand("recover", "detect, project and recover the signal");
    add_model_flags(*recover, cfg);
    add_report_format(*recover, cfg);
    add_detection_flags(*recover, cfg);
    recover->add_flag("--unspiked", cfg.unspiked, "generate lambda = 0 instances");
    recover->add_option("--state", cfg.state_input, "state snapshot to recover from (with --in)");
    recover->add_option("--mode", cfg.recovery.mode, "eig | randomized")
        ->transform(CLI::CheckedTransformer(std::map<std::string, tpca::RecoveryMode>{
            {"eig", tpca::RecoveryMode::eig}, {"randomized", tpca::RecoveryMode::randomized}}));
    recover->add_option("--boost-iters", cfg.recovery.boost_iters, "tensor power iteration cap");
    recover->add_flag("--boost-t-plus", cfg.recovery.boost_with_t_plus, "boost with T+ instead of T0");

    auto* exps = app.add_subcommand("exponents", "runtime exponent table");
    add_model_flags(*exps, cfg);
    add_report_format(*exps, cfg);
    exps->add_option("--logs", cfg.logs, "detect reports to read matvec counts from");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "dos" && cfg.x_grid.empty())
        for (int i = 0; i <= 12; ++i) cfg.x_grid.push_back(0.1 * i);

    try {
        tpca::run_command(cfg, std::cout);
    } catch (const tpca::InvalidParameter& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const tpca::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const tpca::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return 0;
}
