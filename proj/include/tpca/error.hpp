#pragma once

#include <stdexcept>
#include <string>

namespace tpca {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or argument violates a documented precondition.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A requested dimension exceeds a configured capacity limit.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// An iterative solver did not reach its tolerance. Carries the best estimate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_estimate, double achieved_error)
        : Error(what), best_estimate_(best_estimate), achieved_error_(achieved_error) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double achieved_error() const noexcept { return achieved_error_; }

private:
    double best_estimate_;
    double achieved_error_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidParameter(msg);
}

} // namespace tpca
