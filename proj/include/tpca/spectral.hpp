#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "combinatorics.hpp"
#include "error.hpp"
#include "fock.hpp"
#include "hamiltonian.hpp"
#include "instance.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace tpca {

/// Explicit symmetric matrix behind the operator interface (dim/apply).
struct DenseOperator {
    Eigen::MatrixXd matrix;

    std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }

    template <class Scalar>
    void apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) const {
        y = matrix.template cast<Scalar>() * x;
    }
};

template <class Scalar>
struct RitzDecomposition {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<double> ritz_values;   ///< descending
    Mat ritz_vectors;                  ///< one column per Ritz value
    std::vector<double> residuals;     ///< |H y - theta y|
    std::vector<bool> converged;
    Eigen::VectorXd start_expansion;   ///< <y_i, start/|start|>
    int iterations = 0;
    bool invariant_subspace = false;   ///< Krylov space closed under H (breakdown)
};

/// Krylov tridiagonalization with full (two-pass) reorthogonalization.
template <class Scalar>
class LanczosProcess {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    struct Tridiagonal {
        Eigen::VectorXd values;  // descending
        Eigen::MatrixXd vectors; // columns aligned with values
    };

    LanczosProcess(const Vec& start, int capacity) {
        const double n = start.norm();
        require(n > 0.0, "lanczos: start vector must be nonzero");
        const auto d = start.size();
        capacity_ = static_cast<int>(std::min<Eigen::Index>(capacity, d));
        require(capacity_ >= 1, "lanczos: capacity must be >= 1");
        V_.resize(d, capacity_);
        V_.col(0) = start / n;
        size_ = 1;
    }

    int size() const noexcept { return size_; }
    int steps() const noexcept { return static_cast<int>(alpha_.size()); }
    int capacity() const noexcept { return capacity_; }
    bool terminated() const noexcept { return terminated_; }
    bool invariant() const noexcept { return invariant_; }
    double norm_estimate() const noexcept { return scale_; }
    const Mat& basis() const noexcept { return V_; }

    /// One Lanczos step; returns false once the process cannot continue.
    template <class Op>
    bool step(const Op& H) {
        if (terminated_) return false;
        const int j = steps();
        Vec w;
        H.apply(Vec(V_.col(j)), w);
        if (j > 0) w -= beta_[j - 1] * V_.col(j - 1);
        const double a = std::real(V_.col(j).dot(w));
        w -= a * V_.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            const Vec h = V_.leftCols(j + 1).adjoint() * w;
            w -= V_.leftCols(j + 1) * h;
        }
        const double b = w.norm();
        alpha_.push_back(a);
        beta_.push_back(b);
        scale_ = std::max({scale_, std::abs(a), b});
        if (b <= 1e-12 * std::max(scale_, 1e-300) || j + 1 >= static_cast<int>(V_.rows())) {
            invariant_ = true;
            terminated_ = true;
            return false;
        }
        if (j + 1 >= capacity_) {
            terminated_ = true;
            return false;
        }
        V_.col(j + 1) = w / b;
        size_ = j + 2;
        return true;
    }

    Tridiagonal tridiagonal_eigen() const {
        const int k = steps();
        Eigen::VectorXd diag(k), sub(std::max(k - 1, 0));
        for (int i = 0; i < k; ++i) diag[i] = alpha_[i];
        for (int i = 0; i + 1 < k; ++i) sub[i] = beta_[i];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        Tridiagonal out;
        out.values = es.eigenvalues().reverse();
        out.vectors = es.eigenvectors().rowwise().reverse();
        return out;
    }

    /// Residual |H y_i - theta_i y_i| = beta_k |s_{k,i}|.
    double residual(const Tridiagonal& t, int i) const {
        if (invariant_) return 0.0;
        return beta_.back() * std::abs(t.vectors(steps() - 1, i));
    }

    RitzDecomposition<Scalar> decompose(double tol) const {
        const auto t = tridiagonal_eigen();
        const int k = steps();
        RitzDecomposition<Scalar> r;
        r.iterations = k;
        r.invariant_subspace = invariant_;
        r.ritz_values.assign(t.values.data(), t.values.data() + k);
        r.ritz_vectors = V_.leftCols(k) * t.vectors.template cast<Scalar>();
        r.start_expansion = t.vectors.row(0).transpose();
        for (int i = 0; i < k; ++i) {
            r.residuals.push_back(residual(t, i));
            r.converged.push_back(r.residuals.back() <= tol * std::max(scale_, 1.0));
        }
        return r;
    }

private:
    Mat V_;
    std::vector<double> alpha_;
    std::vector<double> beta_;
    int size_ = 0;
    int capacity_ = 0;
    double scale_ = 0.0;
    bool terminated_ = false;
    bool invariant_ = false;
};

/// Lanczos from `start` until the `nev` largest Ritz pairs have residual
/// <= tol * |H|_est, the Krylov space becomes invariant, or max_iters.
template <class Op, class Scalar>
RitzDecomposition<Scalar> lanczos(const Op& H, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& start, int max_iters,
                                  double tol, int nev = 1) {
    require(max_iters >= 1, "lanczos: max_iters must be >= 1");
    LanczosProcess<Scalar> lp(start, max_iters);
    int next_check = std::max(nev + 1, 4);
    while (true) {
        const bool more = lp.step(H);
        if (!more) break;
        if (lp.steps() >= next_check) {
            next_check = std::max(next_check + 4, next_check * 5 / 4);
            const auto t = lp.tridiagonal_eigen();
            bool ok = lp.steps() >= nev;
            for (int i = 0; ok && i < nev; ++i) ok = lp.residual(t, i) <= tol * std::max(lp.norm_estimate(), 1.0);
            if (ok) break;
        }
    }
    return lp.decompose(tol);
}

template <class Scalar>
struct LeadingEigenpair {
    double value = 0.0;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector;
    double residual = 0.0;
    int iterations = 0;
    int restarts = 0;
};

/// Largest eigenvalue with residual <= tol * |H|_est, restarting from the
/// current best Ritz vector when the Krylov capacity is exhausted.
template <class Op>
LeadingEigenpair<double> leading_eigenvalue(const Op& H, Rng& rng, int restarts = 8, double tol = 1e-8, int krylov = 300) {
    const auto d = static_cast<Eigen::Index>(H.dim());
    Eigen::VectorXd start(d);
    for (Eigen::Index i = 0; i < d; ++i) start[i] = standard_normal(rng);
    LeadingEigenpair<double> best;
    best.value = -std::numeric_limits<double>::infinity();
    double best_res = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt <= restarts; ++attempt) {
        auto r = lanczos(H, start, krylov, tol, 1);
        best.iterations += r.iterations;
        best.restarts = attempt;
        best.value = r.ritz_values.front();
        best.vector = r.ritz_vectors.col(0);
        best_res = r.residuals.front();
        best.residual = best_res;
        if (r.converged.front() || r.invariant_subspace) return best;
        start = best.vector;
    }
    throw ConvergenceError("leading_eigenvalue: not converged after restarts", best.value, best_res);
}

/// [lower, upper] enclosing the spectrum, from a short Lanczos run.
template <class Op>
std::pair<double, double> spectral_bounds(const Op& H, Rng& rng, int iters = 60) {
    const auto d = static_cast<Eigen::Index>(H.dim());
    Eigen::VectorXd start(d);
    for (Eigen::Index i = 0; i < d; ++i) start[i] = standard_normal(rng);
    auto r = lanczos(H, start, iters, 0.0, static_cast<int>(std::min<Eigen::Index>(d, iters)));
    const double lo = r.ritz_values.back() - r.residuals.back();
    const double hi = r.ritz_values.front() + r.residuals.front();
    const double pad = 1e-3 * std::max(hi - lo, 1e-12);
    return {lo - pad, hi + pad};
}

enum class ProjectorMethod { ritz, chebyshev, dense };

inline std::string to_string(ProjectorMethod m) {
    switch (m) {
    case ProjectorMethod::ritz: return "ritz";
    case ProjectorMethod::chebyshev: return "chebyshev";
    case ProjectorMethod::dense: return "dense";
    }
    return "?";
}

/// Spectral filter with lower/upper cutoffs: ~1 above e_upper, ~0 below
/// e_lower, monotone but otherwise unspecified in between.
struct ApproxProjector {
    double e_lower = 0.0;
    double e_upper = 0.0;
    ProjectorMethod method = ProjectorMethod::ritz;
    int degree_or_iters = 0;
    double achieved_error = 0.0;
};

template <class Scalar>
struct ProjectionResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> projected;
    double norm_sq = 0.0;
    ApproxProjector projector;
};

struct ProjectorOptions {
    ProjectorMethod method = ProjectorMethod::ritz;
    double tol = 1e-8;
    int max_iters = 2000;
    int max_degree = 1 << 15;
    std::size_t dense_limit = kDefaultDenseLimit;
    std::uint64_t seed = 0; ///< for the Chebyshev spectral-bound estimate
};

namespace detail {

// Weight of x that may sit on the wrong side of the cut: a Ritz vector with
// residual r has at most (r/d)^2 of its weight on eigenvectors farther than d.
inline double misclassified_weight(const Eigen::VectorXd& values, const Eigen::VectorXd& first_row,
                                   const std::vector<double>& residuals, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    double err = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double d = values[i] >= mid ? values[i] - lo : hi - values[i];
        const double r = residuals[static_cast<std::size_t>(i)];
        const double frac = d > 0.0 ? std::min(1.0, (r / d) * (r / d)) : 1.0;
        err += first_row[i] * first_row[i] * frac;
    }
    return err;
}

template <class Op, class Scalar>
ProjectionResult<Scalar> project_ritz(const Op& H, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double lo, double hi,
                                      const ProjectorOptions& opt) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const double mid = 0.5 * (lo + hi);
    LanczosProcess<Scalar> lp(x, opt.max_iters);
    int next_check = 4;
    double err = 1.0;
    typename LanczosProcess<Scalar>::Tridiagonal t;
    std::vector<double> res;
    while (true) {
        const bool more = lp.step(H);
        if (!more || lp.steps() >= next_check) {
            next_check = std::max(next_check + 4, next_check * 5 / 4);
            t = lp.tridiagonal_eigen();
            res.assign(static_cast<std::size_t>(lp.steps()), 0.0);
            for (int i = 0; i < lp.steps(); ++i) res[static_cast<std::size_t>(i)] = lp.residual(t, i);
            err = misclassified_weight(t.values, t.vectors.row(0).transpose(), res, lo, hi);
            if (err <= opt.tol || !more) break;
        }
    }
    ProjectionResult<Scalar> out;
    out.projector = {lo, hi, ProjectorMethod::ritz, lp.steps(), err};
    if (err > opt.tol)
        throw ConvergenceError("project_above: Ritz projector did not reach tolerance", 0.0, err);
    const int k = lp.steps();
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(k);
    double w = 0.0;
    for (int i = 0; i < k; ++i) {
        if (t.values[i] < mid) continue;
        const double s0 = t.vectors(0, i);
        coeff += s0 * t.vectors.col(i);
        w += s0 * s0;
    }
    const double xn = x.norm();
    out.projected = Vec(lp.basis().leftCols(k) * coeff.template cast<Scalar>()) * xn;
    out.norm_sq = w * xn * xn;
    return out;
}

template <class Op, class Scalar>
ProjectionResult<Scalar> project_dense(const Op& H, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double lo, double hi,
                                       const ProjectorOptions& opt) {
    if (H.dim() > opt.dense_limit) throw CapacityError("project_above: dense projector exceeds dense limit");
    const auto d = static_cast<Eigen::Index>(H.dim());
    Eigen::MatrixXd M(d, d);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d), col(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        e[j] = 1.0;
        H.apply(e, col);
        M.col(j) = col;
        e[j] = 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    const double mid = 0.5 * (lo + hi);
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    ProjectionResult<Scalar> out;
    out.projected = Vec::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (es.eigenvalues()[i] < mid) continue;
        const Vec v = es.eigenvectors().col(i).template cast<Scalar>();
        out.projected += v * v.dot(x);
    }
    out.norm_sq = out.projected.squaredNorm();
    out.projector = {lo, hi, ProjectorMethod::dense, static_cast<int>(d), 0.0};
    return out;
}

/// Smooth step 0.5 erfc((mid - t)/w) with w chosen so the step is within
/// tol/4 of 0/1 at the band edges.
struct SmoothStep {
    double mid;
    double width;

    SmoothStep(double lo, double hi, double tol) : mid(0.5 * (lo + hi)) {
        double zl = 0.0, zh = 40.0;
        for (int it = 0; it < 200; ++it) {
            const double z = 0.5 * (zl + zh);
            (std::erfc(z) > 0.5 * tol ? zl : zh) = z;
        }
        width = 0.5 * (hi - lo) / zh;
    }

    double operator()(double t) const { return 0.5 * std::erfc((mid - t) / width); }
};

inline std::vector<double> chebyshev_coefficients(const SmoothStep& f, double a, double b, int degree) {
    const int n = degree + 1;
    std::vector<double> fx(n), c(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const double t = std::cos(std::numbers::pi * (k + 0.5) / n);
        fx[k] = f(0.5 * (b - a) * t + 0.5 * (a + b));
    }
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += fx[k] * std::cos(std::numbers::pi * j * (k + 0.5) / n);
        c[j] = 2.0 * s / n;
    }
    c[0] *= 0.5;
    return c;
}

inline double chebyshev_eval(const std::vector<double>& c, double t) {
    double b1 = 0.0, b2 = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) {
        const double b0 = 2.0 * t * b1 - b2 + c[j];
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + c[0];
}

template <class Op, class Scalar>
ProjectionResult<Scalar> project_chebyshev(const Op& H, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double lo, double hi,
                                           const ProjectorOptions& opt) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Rng rng(opt.seed);
    auto [a, b] = spectral_bounds(H, rng);
    a = std::min(a, lo - (hi - lo));
    b = std::max(b, hi + (hi - lo));
    const SmoothStep f(lo, hi, opt.tol);
    std::vector<double> c;
    double dev = 1.0;
    int degree = 16;
    for (; degree <= opt.max_degree; degree *= 2) {
        c = chebyshev_coefficients(f, a, b, degree);
        dev = 0.0;
        constexpr int kGrid = 4000;
        for (int g = 0; g <= kGrid; ++g) {
            const double s = static_cast<double>(g) / kGrid;
            for (const auto& [from, to, target] : {std::tuple{a, lo, 0.0}, std::tuple{hi, b, 1.0}}) {
                const double theta = from + s * (to - from);
                const double p = chebyshev_eval(c, (2.0 * theta - a - b) / (b - a));
                dev = std::max(dev, std::abs(p * p - target));
            }
        }
        if (dev <= opt.tol) break;
    }
    ProjectionResult<Scalar> out;
    out.projector = {lo, hi, ProjectorMethod::chebyshev, static_cast<int>(c.size()) - 1, dev};
    if (dev > opt.tol) throw ConvergenceError("project_above: Chebyshev degree cap reached", 0.0, dev);
    // y = sum_j c_j T_j(S) x with S = (2H - (a+b)) / (b - a)
    const double s1 = 2.0 / (b - a);
    const double s0 = -(a + b) / (b - a);
    auto scaled = [&](const Vec& v) {
        Vec hv;
        H.apply(v, hv);
        return Vec(s1 * hv + s0 * v);
    };
    Vec t_prev = x;
    Vec t_cur = scaled(x);
    Vec y = c[0] * t_prev + c[1] * t_cur;
    for (std::size_t j = 2; j < c.size(); ++j) {
        Vec t_next = 2.0 * scaled(t_cur) - t_prev;
        y += c[j] * t_next;
        t_prev = std::move(t_cur);
        t_cur = std::move(t_next);
    }
    out.projected = std::move(y);
    out.norm_sq = out.projected.squaredNorm();
    return out;
}

} // namespace detail

/// Filters x through an approximate spectral projector with cutoffs
/// e_lower < e_upper; eigencomponents above e_upper pass with weight >= 1 - tol
/// and below e_lower with weight <= tol.
template <class Op, class Scalar>
ProjectionResult<Scalar> project_above(const Op& H, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, double e_lower,
                                       double e_upper, const ProjectorOptions& opt = {}) {
    require(e_lower < e_upper, "project_above: e_lower must be < e_upper");
    require(std::abs(x.norm() - 1.0) <= 1e-8, "project_above: input must be normalized");
    require(static_cast<std::size_t>(x.size()) == H.dim(), "project_above: dimension mismatch");
    switch (opt.method) {
    case ProjectorMethod::ritz: return detail::project_ritz(H, x, e_lower, e_upper, opt);
    case ProjectorMethod::chebyshev: return detail::project_chebyshev(H, x, e_lower, e_upper, opt);
    case ProjectorMethod::dense: return detail::project_dense(H, x, e_lower, e_upper, opt);
    }
    throw InvalidParameter("project_above: unknown method");
}

struct SpectrumSummary {
    std::vector<double> eigenvalues; ///< descending
    std::string source;
};

inline SpectrumSummary full_spectrum(const HamiltonianOperator& H, std::size_t dense_limit = kDefaultDenseLimit) {
    const Eigen::MatrixXd M = materialize_dense(H, dense_limit);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    SpectrumSummary out;
    out.source = "dense";
    const auto& ev = es.eigenvalues();
    out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::reverse(out.eigenvalues.begin(), out.eigenvalues.end());
    return out;
}

struct AnalyticBounds {
    double J = 0.0;
    double E_max = 0.0;
    double xi = 0.0;
    double E_0 = 0.0;
    double E_cut = 0.0;
    double nbos_eq = 0.0;     ///< real root of E_0(n) = E_max(n) in [2, 64]
    int nbos_eq_ceil = 0;
    bool nbos_eq_bracketed = true;
    ModelParams inputs;
};

/// J for p = 4: 2 C(n,2) / n^2, doubled for the complex ensemble.
inline double j_coefficient(double n_bos, Ensemble e) {
    const double j = n_bos * (n_bos - 1.0) / (n_bos * n_bos);
    return e == Ensemble::complex ? 2.0 * j : j;
}

/// Tail-bound centre sqrt(2 J ln N) n^{3/2} N.
inline double e_max(int N, double n_bos, Ensemble e) {
    require(N >= 2, "E_max: N must be >= 2");
    const double J = j_coefficient(n_bos, e);
    return std::sqrt(2.0 * J * std::log(static_cast<double>(N))) * std::pow(n_bos, 1.5) * N;
}

/// Spiked variational value lambda * 2 * C(n,2) * N^2.
inline double e_zero(double lambda_bar, int N, double n_bos) {
    return lambda_bar * n_bos * (n_bos - 1.0) * static_cast<double>(N) * N;
}

inline AnalyticBounds analytic_bounds(const ModelParams& params) {
    require(params.p == 4, "analytic_bounds: p must be 4");
    require(params.N >= 2, "analytic_bounds: N must be >= 2");
    AnalyticBounds b;
    b.inputs = params;
    const double n = params.n_bos;
    b.J = j_coefficient(n, params.ensemble);
    b.E_max = e_max(params.N, n, params.ensemble);
    b.xi = std::sqrt(b.J) * std::sqrt(n) * params.N / std::sqrt(2.0 * std::log(static_cast<double>(params.N)));
    b.E_0 = e_zero(params.lambda_bar, params.N, n);
    b.E_cut = 0.5 * (b.E_0 + b.E_max);
    auto f = [&](double x) { return e_zero(params.lambda_bar, params.N, x) - e_max(params.N, x, params.ensemble); };
    double lo = 2.0, hi = 64.0;
    if (f(lo) >= 0.0) {
        b.nbos_eq = lo;
        b.nbos_eq_bracketed = false;
    } else if (f(hi) < 0.0) {
        b.nbos_eq = hi;
        b.nbos_eq_bracketed = false;
    } else {
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (lo + hi);
            (f(m) < 0.0 ? lo : hi) = m;
        }
        b.nbos_eq = 0.5 * (lo + hi);
    }
    b.nbos_eq_ceil = static_cast<int>(std::ceil(b.nbos_eq - 1e-12));
    return b;
}

enum class EmaxReference { analytic, empirical };

struct DosEstimate {
    std::vector<double> x_grid;
    std::vector<double> p_greater;
    std::vector<double> stderr_;
    std::vector<double> g_hat;           ///< +inf where no eigenvalue was counted
    std::vector<bool> g_hat_lower_bound; ///< true where g_hat is only a lower bound
    std::vector<double> lambda1;         ///< per trial
    std::vector<std::vector<double>> spectra;
    double e_max_ref = 0.0;
    int N = 0;
    int n_bos = 0;
    int trials = 0;
    std::uint64_t seed = 0;

    double mean_lambda1() const {
        double s = 0.0;
        for (double x : lambda1) s += x;
        return lambda1.empty() ? 0.0 : s / static_cast<double>(lambda1.size());
    }

    /// Mean over trials of the fraction of eigenvalues >= threshold.
    double mean_fraction_at_least(double threshold) const {
        double s = 0.0;
        for (const auto& sp : spectra) {
            const auto c = std::count_if(sp.begin(), sp.end(), [&](double e) { return e >= threshold; });
            s += static_cast<double>(c) / static_cast<double>(sp.size());
        }
        return spectra.empty() ? 0.0 : s / static_cast<double>(spectra.size());
    }
};

/// Estimates P^>(n_bos, x), the expected fraction of eigenvalues of H(G) at
/// or above x * E_max_ref, over unspiked draws.
inline DosEstimate density_of_states(const ModelParams& params, const std::vector<double>& x_grid, int trials,
                                     const SeedSequence& seeds, EmaxReference ref = EmaxReference::analytic,
                                     std::size_t dense_limit = kDefaultDenseLimit, unsigned threads = 1) {
    params.validate();
    require(trials >= 1, "density_of_states: trials must be >= 1");
    require(params.N >= 2, "density_of_states: N must be >= 2");
    auto basis = build_basis(params.N, params.n_bos);
    if (basis->dim() > dense_limit) throw CapacityError("density_of_states: dimension exceeds dense limit");

    DosEstimate out;
    out.x_grid = x_grid;
    out.N = params.N;
    out.n_bos = params.n_bos;
    out.trials = trials;
    out.seed = seeds.seed();
    out.spectra.resize(static_cast<std::size_t>(trials));
    out.lambda1.resize(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
        Rng rng = seeds.stream("dos-noise", t);
        const auto G = sample_gaussian_tensor<double>(params.N, rng, params.convention);
        HamiltonianOperator H(G, basis, false);
        out.spectra[t] = full_spectrum(H, dense_limit).eigenvalues;
        out.lambda1[t] = out.spectra[t].front();
    });
    out.e_max_ref = ref == EmaxReference::analytic ? e_max(params.N, params.n_bos, params.ensemble) : out.mean_lambda1();

    const double D = static_cast<double>(basis->dim());
    for (double x : x_grid) {
        const double thr = x * out.e_max_ref;
        double s = 0.0, s2 = 0.0;
        for (const auto& sp : out.spectra) {
            const double f = static_cast<double>(std::count_if(sp.begin(), sp.end(), [&](double e) { return e >= thr; })) / D;
            s += f;
            s2 += f * f;
        }
        const double mean = s / trials;
        const double var = trials > 1 ? std::max(0.0, (s2 - trials * mean * mean) / (trials - 1)) : 0.0;
        out.p_greater.push_back(mean);
        out.stderr_.push_back(std::sqrt(var / trials));
        if (mean > 0.0) {
            out.g_hat.push_back(-std::log(mean) / (params.n_bos * std::log(static_cast<double>(params.N))));
            out.g_hat_lower_bound.push_back(false);
        } else {
            out.g_hat.push_back(std::numeric_limits<double>::infinity());
            out.g_hat_lower_bound.push_back(true);
        }
    }
    return out;
}

} // namespace tpca
