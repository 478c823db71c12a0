#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "combinatorics.hpp"
#include "error.hpp"

namespace tpca {

using Complex = std::complex<double>;

template <class T> struct is_complex : std::false_type {};
template <class T> struct is_complex<std::complex<T>> : std::true_type {};
template <class T> inline constexpr bool is_complex_v = is_complex<T>::value;

inline double abs2(double x) { return x * x; }
inline double abs2(const Complex& z) { return std::norm(z); }
inline double conj_if(double x) { return x; }
inline Complex conj_if(const Complex& z) { return std::conj(z); }

using Index4 = std::array<int, 4>;

/// Number of distinct orderings of a 4-index tuple: 24 / prod(m!).
inline int orbit_size(Index4 t) {
    std::sort(t.begin(), t.end());
    int denom = 1;
    int run = 1;
    for (int i = 1; i < 4; ++i) {
        if (t[i] == t[i - 1]) {
            ++run;
            denom *= run;
        } else {
            run = 1;
        }
    }
    return 24 / denom;
}

/// Order-4 fully symmetric tensor over N modes, stored once per sorted index
/// tuple a <= b <= c <= d. Symmetry under the 24 index permutations is
/// structural: every permutation of a tuple reads the same slot.
template <class Scalar>
class SymTensor4 {
public:
    using scalar_type = Scalar;

    SymTensor4() = default;

    explicit SymTensor4(int N) : N_(N) {
        require(N >= 1, "SymTensor4: N must be >= 1");
        data_.assign(static_cast<std::size_t>(binomial(N + 3, 4)), Scalar(0));
    }

    int N() const noexcept { return N_; }
    std::size_t size() const noexcept { return data_.size(); }

    /// Canonical slot of the (unsorted) tuple.
    static std::size_t canonical_index(Index4 t) {
        std::sort(t.begin(), t.end());
        return static_cast<std::size_t>(binomial(t[0], 1) + binomial(t[1] + 1, 2) + binomial(t[2] + 2, 3) +
                                        binomial(t[3] + 3, 4));
    }

    Scalar operator()(int a, int b, int c, int d) const { return data_[canonical_index({a, b, c, d})]; }
    Scalar& operator()(int a, int b, int c, int d) { return data_[canonical_index({a, b, c, d})]; }

    const Scalar& canonical(std::size_t i) const { return data_[i]; }
    Scalar& canonical(std::size_t i) { return data_[i]; }

    const std::vector<Scalar>& data() const noexcept { return data_; }
    std::vector<Scalar>& data() noexcept { return data_; }

    /// Sorted tuples in storage order.
    std::vector<Index4> canonical_tuples() const {
        std::vector<Index4> out;
        out.reserve(data_.size());
        // colex over strictly increasing (a, b+1, c+2, d+3) matches canonical_index.
        for (int d = 0; d < N_; ++d)
            for (int c = 0; c <= d; ++c)
                for (int b = 0; b <= c; ++b)
                    for (int a = 0; a <= b; ++a) out.push_back({a, b, c, d});
        return out;
    }

    /// Squared norm of the full N^4 array (each slot counted with its orbit size).
    double frobenius_norm_sq() const {
        double s = 0.0;
        std::size_t i = 0;
        for (const auto& t : canonical_tuples()) s += orbit_size(t) * abs2(data_[i++]);
        return s;
    }

    bool is_zero() const {
        return std::all_of(data_.begin(), data_.end(), [](const Scalar& x) { return x == Scalar(0); });
    }

    SymTensor4& operator+=(const SymTensor4& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    SymTensor4& operator-=(const SymTensor4& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    SymTensor4& operator*=(double s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    friend SymTensor4 operator+(SymTensor4 a, const SymTensor4& b) { return a += b; }
    friend SymTensor4 operator-(SymTensor4 a, const SymTensor4& b) { return a -= b; }
    friend SymTensor4 operator*(double s, SymTensor4 a) { return a *= s; }

    template <class Other>
    SymTensor4<Other> cast() const {
        SymTensor4<Other> r(N_);
        for (std::size_t i = 0; i < data_.size(); ++i) r.canonical(i) = static_cast<Other>(data_[i]);
        return r;
    }

    /// Real part of a complex tensor (identity for real tensors).
    SymTensor4<double> real() const {
        SymTensor4<double> r(N_);
        for (std::size_t i = 0; i < data_.size(); ++i) r.canonical(i) = std::real(data_[i]);
        return r;
    }

    /// Dense row-major N^4 copy; debug use, N <= 32.
    std::vector<Scalar> to_dense() const {
        if (N_ > 32) throw CapacityError("SymTensor4::to_dense: N > 32");
        const std::size_t n = static_cast<std::size_t>(N_);
        std::vector<Scalar> out(n * n * n * n);
        for (int a = 0; a < N_; ++a)
            for (int b = 0; b < N_; ++b)
                for (int c = 0; c < N_; ++c)
                    for (int d = 0; d < N_; ++d) out[((a * n + b) * n + c) * n + d] = (*this)(a, b, c, d);
        return out;
    }

    /// Symmetrizes a dense N^4 array (average over the 24 permutations).
    static SymTensor4 symmetrize_dense(int N, const std::vector<Scalar>& dense) {
        const std::size_t n = static_cast<std::size_t>(N);
        require(dense.size() == n * n * n * n, "symmetrize_dense: size mismatch");
        SymTensor4 r(N);
        std::vector<Scalar> acc(r.size(), Scalar(0));
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                for (int c = 0; c < N; ++c)
                    for (int d = 0; d < N; ++d)
                        acc[canonical_index({a, b, c, d})] += dense[((a * n + b) * n + c) * n + d];
        std::size_t i = 0;
        for (const auto& t : r.canonical_tuples()) {
            r.data_[i] = acc[i] / static_cast<double>(orbit_size(t));
            ++i;
        }
        return r;
    }

    /// T'_{abcd} = sum U_{ai} U_{bj} U_{ck} U_{dl} T_{ijkl}; used to move to the
    /// frame where a given vector lies along mode 0.
    SymTensor4 rotated(const Eigen::MatrixXd& U) const {
        require(U.rows() == N_ && U.cols() == N_, "rotated: U must be N x N");
        const int n = N_;
        std::vector<Scalar> cur = to_dense(), next(cur.size());
        // Contract one slot at a time; each pass moves the transformed slot to the back.
        for (int pass = 0; pass < 4; ++pass) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int a = 0; a < n; ++a) {
                            Scalar s(0);
                            for (int l = 0; l < n; ++l) s += U(a, l) * cur[((l * n + i) * n + j) * n + k];
                            next[((i * n + j) * n + k) * n + a] = s;
                        }
            std::swap(cur, next);
        }
        return symmetrize_dense(N_, cur);
    }

private:
    void check_same(const SymTensor4& o) const {
        require(o.N_ == N_, "SymTensor4: mode count mismatch");
    }

    int N_ = 0;
    std::vector<Scalar> data_;
};

using RealTensor = SymTensor4<double>;
using ComplexTensor = SymTensor4<Complex>;

/// Rank-one tensor v (x) v (x) v (x) v scaled by lambda.
inline RealTensor rank_one_tensor(double lambda, const Eigen::VectorXd& v) {
    RealTensor T(static_cast<int>(v.size()));
    std::size_t i = 0;
    for (const auto& t : T.canonical_tuples()) T.canonical(i++) = lambda * v[t[0]] * v[t[1]] * v[t[2]] * v[t[3]];
    return T;
}

/// M(u)_a = sum_{bcd} T_{abcd} u_b u_c u_d.
inline Eigen::VectorXd contract3(const RealTensor& T, const Eigen::VectorXd& u) {
    const int n = T.N();
    require(u.size() == n, "contract3: size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    std::size_t i = 0;
    for (const auto& t : T.canonical_tuples()) {
        const double x = T.canonical(i++);
        if (x == 0.0) continue;
        // Each distinct ordering contributes once; distribute over the first slot.
        const auto& [a, b, c, d] = t;
        const double w = x * orbit_size(t) / 4.0;
        out[a] += w * u[b] * u[c] * u[d];
        out[b] += w * u[a] * u[c] * u[d];
        out[c] += w * u[a] * u[b] * u[d];
        out[d] += w * u[a] * u[b] * u[c];
    }
    return out;
}

} // namespace tpca
