#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "combinatorics.hpp"
#include "error.hpp"
#include "sym_tensor.hpp"

namespace tpca {

inline constexpr std::uint64_t kDefaultMaxBasisDim = 5'000'000;

/// Occupation-number basis of the symmetric subspace of (C^N)^{(x) n_bos}.
///
/// States are length-N occupation vectors summing to n_bos, stored in
/// colexicographic order: the last mode is the most significant digit, so
/// the first state is (n_bos, 0, ..., 0) and the last is (0, ..., 0, n_bos).
class OccupationBasis {
public:
    OccupationBasis(int N, int n_bos, std::uint64_t max_dim = kDefaultMaxBasisDim)
        : N_(N), n_bos_(n_bos), binom_(N + n_bos + 1) {
        require(N >= 1, "OccupationBasis: N must be >= 1");
        require(n_bos >= 0 && n_bos <= 255, "OccupationBasis: n_bos must be in [0, 255]");
        const std::uint64_t d = binomial(static_cast<std::uint64_t>(N + n_bos - 1), static_cast<std::uint64_t>(n_bos));
        if (d > max_dim)
            throw CapacityError("OccupationBasis: dimension " + std::to_string(d) + " exceeds limit " +
                                std::to_string(max_dim));
        dim_ = static_cast<std::size_t>(d);
        states_.resize(dim_ * static_cast<std::size_t>(N_));
        std::vector<std::uint8_t> occ(N_, 0);
        std::size_t next = 0;
        enumerate(N_ - 1, n_bos_, occ, next);
    }

    int N() const noexcept { return N_; }
    int n_bos() const noexcept { return n_bos_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const std::uint8_t> occupation(std::size_t i) const {
        return {states_.data() + i * static_cast<std::size_t>(N_), static_cast<std::size_t>(N_)};
    }

    /// Position of an occupation vector. No validation; see rank().
    template <class Int>
    std::size_t rank_unchecked(std::span<const Int> occ) const {
        std::uint64_t r = 0;
        int remaining = n_bos_;
        for (int j = N_ - 1; j >= 1; --j) {
            const int nj = static_cast<int>(occ[j]);
            // states of modes 0..j with `remaining` bosons whose mode-j count is below nj
            r += binom_(remaining + j, j) - binom_(remaining - nj + j, j);
            remaining -= nj;
        }
        return static_cast<std::size_t>(r);
    }

    std::size_t rank(std::span<const int> occ) const {
        require(static_cast<int>(occ.size()) == N_, "rank: occupation vector has wrong length");
        int total = 0;
        for (int x : occ) {
            require(x >= 0, "rank: negative occupation");
            total += x;
        }
        require(total == n_bos_, "rank: occupation does not sum to n_bos");
        return rank_unchecked(occ);
    }

    std::vector<int> unrank(std::size_t index) const {
        require(index < dim_, "unrank: index out of range");
        auto s = occupation(index);
        return {s.begin(), s.end()};
    }

    bool same_as(const OccupationBasis& o) const noexcept { return N_ == o.N_ && n_bos_ == o.n_bos_; }

private:
    void enumerate(int mode, int remaining, std::vector<std::uint8_t>& occ, std::size_t& next) {
        if (mode == 0) {
            occ[0] = static_cast<std::uint8_t>(remaining);
            std::copy(occ.begin(), occ.end(), states_.begin() + static_cast<std::ptrdiff_t>(next * N_));
            ++next;
            return;
        }
        for (int t = 0; t <= remaining; ++t) {
            occ[mode] = static_cast<std::uint8_t>(t);
            enumerate(mode - 1, remaining - t, occ, next);
        }
        occ[mode] = 0;
    }

    int N_;
    int n_bos_;
    std::size_t dim_ = 0;
    BinomialTable binom_;
    std::vector<std::uint8_t> states_;
};

using BasisPtr = std::shared_ptr<const OccupationBasis>;

inline BasisPtr build_basis(int N, int n_bos, std::uint64_t max_dim = kDefaultMaxBasisDim) {
    return std::make_shared<const OccupationBasis>(N, n_bos, max_dim);
}

/// Amplitude vector over an occupation basis.
template <class Scalar>
struct StateVector {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    BasisPtr basis;
    Vector amps;

    StateVector() = default;
    explicit StateVector(BasisPtr b) : basis(std::move(b)), amps(Vector::Zero(static_cast<Eigen::Index>(basis->dim()))) {}
    StateVector(BasisPtr b, Vector a) : basis(std::move(b)), amps(std::move(a)) {
        require(static_cast<std::size_t>(amps.size()) == basis->dim(), "StateVector: amplitude length mismatch");
    }

    std::size_t dim() const { return basis->dim(); }
    double norm() const { return amps.norm(); }
    double norm_sq() const { return amps.squaredNorm(); }

    StateVector normalized() const {
        const double n = norm();
        require(n > 0.0, "StateVector::normalized: zero vector");
        return StateVector(basis, amps / n);
    }

    template <class Other>
    StateVector<Other> cast() const {
        return StateVector<Other>(basis, amps.template cast<Other>());
    }
};

using RealState = StateVector<double>;
using ComplexState = StateVector<Complex>;

inline void check_same_basis(const OccupationBasis& a, const OccupationBasis& b) {
    if (!a.same_as(b)) throw InvalidParameter("state vectors live on different bases");
}

/// <x, y>, conjugate-linear in x.
template <class Scalar>
Scalar inner(const StateVector<Scalar>& x, const StateVector<Scalar>& y) {
    check_same_basis(*x.basis, *y.basis);
    return x.amps.dot(y.amps);
}

template <class Scalar>
double norm(const StateVector<Scalar>& x) {
    return x.norm();
}

/// Normalized |v^{(x) n_bos}> in the occupation basis.
inline RealState embed_product_state(const BasisPtr& basis, const Eigen::VectorXd& v) {
    require(v.size() == basis->N(), "embed_product_state: vector length does not match N");
    const double vn = v.norm();
    require(vn > 0.0, "embed_product_state: zero vector");
    const Eigen::VectorXd u = v / vn;
    const int n = basis->n_bos();
    const double log_nfact = std::lgamma(n + 1.0);
    RealState out(basis);
    for (std::size_t i = 0; i < basis->dim(); ++i) {
        auto occ = basis->occupation(i);
        double log_denom = 0.0;
        double prod = 1.0;
        for (int mu = 0; mu < basis->N(); ++mu) {
            const int k = occ[mu];
            if (k == 0) continue;
            log_denom += std::lgamma(k + 1.0);
            prod *= std::pow(u[mu], k);
        }
        out.amps[static_cast<Eigen::Index>(i)] = std::exp(0.5 * (log_nfact - log_denom)) * prod;
    }
    return out;
}

/// Occupation-basis coefficients of |T> on four bosons: sqrt(24/prod m!) T(m).
template <class Scalar>
StateVector<Scalar> tensor_state(const BasisPtr& basis4, const SymTensor4<Scalar>& T) {
    require(basis4->n_bos() == 4, "tensor_state: basis must have 4 bosons");
    require(basis4->N() == T.N(), "tensor_state: mode count mismatch");
    StateVector<Scalar> out(basis4);
    std::vector<int> occ(T.N());
    for (std::size_t i = 0; i < basis4->dim(); ++i) {
        auto o = basis4->occupation(i);
        Index4 t{};
        int pos = 0;
        int denom = 1;
        for (int mu = 0; mu < T.N(); ++mu)
            for (int c = 0; c < o[mu]; ++c) {
                t[pos++] = mu;
                denom *= (c + 1);
            }
        out.amps[static_cast<Eigen::Index>(i)] = std::sqrt(24.0 / denom) * T(t[0], t[1], t[2], t[3]);
    }
    return out;
}

/// Pi_symm(a (x) b) expressed in the basis on n_a + n_b bosons.
///
/// For normalized occupation states |r>, |m>, the overlap <r+m| Pi_symm |r>|m>
/// is sqrt(prod_mu C(r_mu + m_mu, r_mu) / C(n, n_a)).
template <class Scalar>
StateVector<Scalar> symmetrized_product(const StateVector<Scalar>& a, const StateVector<Scalar>& b, const BasisPtr& out_basis) {
    const auto& A = *a.basis;
    const auto& B = *b.basis;
    require(A.N() == B.N() && out_basis->N() == A.N(), "symmetrized_product: mode count mismatch");
    require(out_basis->n_bos() == A.n_bos() + B.n_bos(), "symmetrized_product: output boson count mismatch");
    const int N = A.N();
    const double inv_total = 1.0 / static_cast<double>(binomial(out_basis->n_bos(), A.n_bos()));
    BinomialTable binom(out_basis->n_bos() + 1);
    StateVector<Scalar> out(out_basis);
    std::vector<int> sum(N);
    for (std::size_t i = 0; i < A.dim(); ++i) {
        const Scalar ai = a.amps[static_cast<Eigen::Index>(i)];
        if (ai == Scalar(0)) continue;
        auto r = A.occupation(i);
        for (std::size_t j = 0; j < B.dim(); ++j) {
            const Scalar bj = b.amps[static_cast<Eigen::Index>(j)];
            if (bj == Scalar(0)) continue;
            auto m = B.occupation(j);
            double w = inv_total;
            for (int mu = 0; mu < N; ++mu) {
                sum[mu] = r[mu] + m[mu];
                w *= static_cast<double>(binom(sum[mu], r[mu]));
            }
            out.amps[static_cast<Eigen::Index>(out_basis->rank_unchecked(std::span<const int>(sum)))] += std::sqrt(w) * ai * bj;
        }
    }
    return out;
}

template <class Scalar>
struct PowerStateEmbedding {
    StateVector<Scalar> state; ///< normalized symmetric-subspace state
    double symm_norm = 0.0;    ///< |Pi_symm (|T>/|T|)^{(x) k}|, <= 1
};

/// Normalized projection onto the symmetric subspace of (|T>/|T|)^{(x) k},
/// k = n_bos / 4, built by repeated symmetrized products of the 4-boson
/// block. The pre-normalization norm is returned alongside.
template <class Scalar>
PowerStateEmbedding<Scalar> embed_power_state(const BasisPtr& basis, const SymTensor4<Scalar>& T) {
    require(basis->n_bos() % 4 == 0 && basis->n_bos() >= 4, "embed_power_state: n_bos must be a positive multiple of 4");
    require(basis->N() == T.N(), "embed_power_state: mode count mismatch");
    const double tn = std::sqrt(T.frobenius_norm_sq());
    require(tn > 0.0, "embed_power_state: zero tensor");
    auto b4 = basis->n_bos() == 4 ? basis : build_basis(T.N(), 4);
    StateVector<Scalar> block = tensor_state(b4, T);
    block.amps /= tn;
    StateVector<Scalar> acc = block;
    for (int n = 8; n <= basis->n_bos(); n += 4) {
        auto bn = n == basis->n_bos() ? basis : build_basis(T.N(), n);
        acc = symmetrized_product(acc, block, bn);
    }
    const double sn = acc.norm();
    require(sn > 0.0, "embed_power_state: symmetric projection vanished");
    return {StateVector<Scalar>(basis, acc.amps / sn), sn};
}

} // namespace tpca
