#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "combinatorics.hpp"
#include "error.hpp"
#include "fock.hpp"
#include "sym_tensor.hpp"

namespace tpca {

inline constexpr std::size_t kDefaultDenseLimit = 4000;

/// Matrix-free H(T) = sum_{mu nu rho sigma} T_{mu nu rho sigma} a+_mu a+_nu a_rho a_sigma
/// on the fixed-n_bos occupation basis, for real symmetric T.
///
/// Grouping the annihilated and created pairs as unordered pairs q, p gives
/// H = sum_{q,p} K_{qp} A_q^+ A_p with A_p = a_rho a_sigma and
/// K_{qp} = w_q w_p T(q u p), w = 2 for distinct modes and 1 otherwise.
/// Every application of A_p lands in the (n_bos - 2)-boson basis, so a matvec
/// is gather -> dense (rows x P) * (P x P) product -> scatter, with P = N(N+1)/2.
/// The (row, pair) -> (raised index, bosonic factor) table is optionally cached.
class HamiltonianOperator {
public:
    HamiltonianOperator(RealTensor tensor, BasisPtr basis, bool cache_rows = true)
        : tensor_(std::move(tensor)), basis_(std::move(basis)), matvecs_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
        require(tensor_.N() == basis_->N(), "HamiltonianOperator: tensor and basis mode counts differ");
        const int N = basis_->N();
        for (int r = 0; r < N; ++r)
            for (int s = r; s < N; ++s) pairs_.push_back({r, s});
        const auto P = static_cast<Eigen::Index>(pairs_.size());
        coupling_.resize(P, P);
        for (Eigen::Index q = 0; q < P; ++q)
            for (Eigen::Index p = 0; p < P; ++p) {
                const auto [m, n] = pairs_[static_cast<std::size_t>(q)];
                const auto [r, s] = pairs_[static_cast<std::size_t>(p)];
                const double wq = m == n ? 1.0 : 2.0;
                const double wp = r == s ? 1.0 : 2.0;
                coupling_(q, p) = wq * wp * tensor_(m, n, r, s);
            }
        if (basis_->n_bos() >= 2) {
            lower_ = build_basis(N, basis_->n_bos() - 2, std::max<std::uint64_t>(basis_->dim(), 1));
            if (cache_rows) build_cache();
        }
    }

    const RealTensor& tensor() const noexcept { return tensor_; }
    const BasisPtr& basis() const noexcept { return basis_; }
    std::size_t dim() const noexcept { return basis_->dim(); }
    bool cached() const noexcept { return !raise_index_.empty(); }

    std::uint64_t matvec_count() const noexcept { return matvecs_->load(); }
    void reset_matvec_count() const noexcept { matvecs_->store(0); }

    /// y = H x on raw amplitude vectors.
    template <class Scalar>
    void apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) const {
        require(static_cast<std::size_t>(x.size()) == dim(), "HamiltonianOperator::apply: dimension mismatch");
        matvecs_->fetch_add(1);
        y.setZero(x.size());
        if (!lower_) return;
        using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
        const auto P = static_cast<Eigen::Index>(pairs_.size());
        const Mat K = coupling_.template cast<Scalar>();
        constexpr std::size_t kBlock = 512;
        const std::size_t rows = lower_->dim();
        Mat U(static_cast<Eigen::Index>(std::min(kBlock, rows)), P);
        std::vector<std::uint32_t> idx(static_cast<std::size_t>(P));
        std::vector<double> amp(static_cast<std::size_t>(P));
        for (std::size_t start = 0; start < rows; start += kBlock) {
            const std::size_t nb = std::min(kBlock, rows - start);
            U.resize(static_cast<Eigen::Index>(nb), P);
            for (std::size_t b = 0; b < nb; ++b) {
                const auto [ip, ap] = row(start + b, idx, amp);
                for (Eigen::Index p = 0; p < P; ++p) U(static_cast<Eigen::Index>(b), p) = ap[p] * x[ip[p]];
            }
            // K is symmetric, so (K U^T)^T = U K.
            const Mat Z = U * K;
            for (std::size_t b = 0; b < nb; ++b) {
                const auto [ip, ap] = row(start + b, idx, amp);
                for (Eigen::Index p = 0; p < P; ++p) y[ip[p]] += ap[p] * Z(static_cast<Eigen::Index>(b), p);
            }
        }
    }

    template <class Scalar>
    StateVector<Scalar> apply(const StateVector<Scalar>& x) const {
        check_same_basis(*x.basis, *basis_);
        StateVector<Scalar> y(basis_);
        apply(x.amps, y.amps);
        return y;
    }

private:
    using Row = std::pair<const std::uint32_t*, const double*>;

    Row row(std::size_t m, std::vector<std::uint32_t>& idx, std::vector<double>& amp) const {
        const std::size_t P = pairs_.size();
        if (cached()) return {raise_index_.data() + m * P, raise_amp_.data() + m * P};
        fill_row(m, idx.data(), amp.data());
        return {idx.data(), amp.data()};
    }

    void fill_row(std::size_t m, std::uint32_t* idx, double* amp) const {
        const int N = basis_->N();
        auto occ = lower_->occupation(m);
        std::vector<int> raised(occ.begin(), occ.end());
        for (std::size_t p = 0; p < pairs_.size(); ++p) {
            const auto [r, s] = pairs_[p];
            const double f = r == s ? std::sqrt((raised[r] + 1.0) * (raised[r] + 2.0))
                                    : std::sqrt((raised[r] + 1.0) * (raised[s] + 1.0));
            ++raised[r];
            ++raised[s];
            idx[p] = static_cast<std::uint32_t>(basis_->rank_unchecked(std::span<const int>(raised.data(), static_cast<std::size_t>(N))));
            amp[p] = f;
            --raised[r];
            --raised[s];
        }
    }

    void build_cache() {
        const std::size_t P = pairs_.size();
        raise_index_.resize(lower_->dim() * P);
        raise_amp_.resize(lower_->dim() * P);
        for (std::size_t m = 0; m < lower_->dim(); ++m) fill_row(m, raise_index_.data() + m * P, raise_amp_.data() + m * P);
    }

    RealTensor tensor_;
    BasisPtr basis_;
    BasisPtr lower_;
    std::vector<std::pair<int, int>> pairs_;
    Eigen::MatrixXd coupling_;
    std::vector<std::uint32_t> raise_index_;
    std::vector<double> raise_amp_;
    std::shared_ptr<std::atomic<std::uint64_t>> matvecs_;
};

/// Dense D x D matrix of H, built column by column from apply().
inline Eigen::MatrixXd materialize_dense(const HamiltonianOperator& H, std::size_t dense_limit = kDefaultDenseLimit) {
    const std::size_t D = H.dim();
    if (D > dense_limit) throw CapacityError("materialize_dense: dimension exceeds dense limit");
    const auto d = static_cast<Eigen::Index>(D);
    Eigen::MatrixXd M(d, d);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d), col(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        e[j] = 1.0;
        H.apply(e, col);
        M.col(j) = col;
        e[j] = 0.0;
    }
    return 0.5 * (M + M.transpose());
}

/// <x|H|x> for a normalized state.
template <class Scalar>
double expectation(const HamiltonianOperator& H, const StateVector<Scalar>& x) {
    require(std::abs(x.norm() - 1.0) <= 1e-8, "expectation: state must be normalized");
    const auto y = H.apply(x);
    return std::real(inner(x, y));
}

/// Closed-form <Psi_ideal|H^2|Psi_ideal> in the frame where the signal is
/// along mode 0:
/// P_{n,4} T_0000^2 + 4 P_{n,3} sum_a T_000a^2 + 2 P_{n,2} sum_ab T_00ab^2.
inline double ideal_moment2(const RealTensor& T, int n_bos) {
    const int N = T.N();
    double s3 = 0.0;
    double s2 = 0.0;
    for (int a = 0; a < N; ++a) {
        s3 += T(0, 0, 0, a) * T(0, 0, 0, a);
        for (int b = 0; b < N; ++b) s2 += T(0, 0, a, b) * T(0, 0, a, b);
    }
    const double t = T(0, 0, 0, 0);
    return falling_factorial(n_bos, 4) * t * t + 4.0 * falling_factorial(n_bos, 3) * s3 +
           2.0 * falling_factorial(n_bos, 2) * s2;
}

/// Closed-form <Psi_ideal|H|Psi_ideal> = P_{n,2} T_0000 in the same frame.
inline double ideal_moment1(const RealTensor& T, int n_bos) { return falling_factorial(n_bos, 2) * T(0, 0, 0, 0); }

} // namespace tpca
