#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "error.hpp"

namespace tpca {

/// Binomial coefficient with overflow detection (saturates to uint64 max).
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t num = n - k + i;
        // r * num / i is exact at every step; guard the multiplication.
        if (r > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
        r = r * num / i;
    }
    return r;
}

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

/// Ordered selections P_{n,k} = n!/(n-k)!; zero when k > n.
inline double falling_factorial(int n, int k) {
    if (k < 0 || n < 0) throw InvalidParameter("falling_factorial: negative argument");
    if (k > n) return 0.0;
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= (n - i);
    return r;
}

/// Dense Pascal table C(n, k) for n, k <= size.
class BinomialTable {
public:
    explicit BinomialTable(int size) : size_(size + 1), table_(static_cast<std::size_t>(size_) * size_, 0) {
        for (int n = 0; n < size_; ++n) {
            at(n, 0) = 1;
            for (int k = 1; k <= n; ++k) {
                const std::uint64_t a = at(n - 1, k - 1);
                const std::uint64_t b = (k <= n - 1) ? at(n - 1, k) : 0;
                at(n, k) = (a > std::numeric_limits<std::uint64_t>::max() - b)
                               ? std::numeric_limits<std::uint64_t>::max()
                               : a + b;
            }
        }
    }

    std::uint64_t operator()(int n, int k) const {
        if (n < 0 || k < 0 || k > n) return 0;
        return table_[static_cast<std::size_t>(n) * size_ + k];
    }

private:
    std::uint64_t& at(int n, int k) { return table_[static_cast<std::size_t>(n) * size_ + k]; }

    int size_;
    std::vector<std::uint64_t> table_;
};

} // namespace tpca
