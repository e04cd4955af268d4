// Common numeric aliases shared by every acerac header.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace acerac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an operation needs more data than is available (e.g. an
/// empty replay memory).
class NotReadyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& what) {
    if (!condition) {
        throw std::invalid_argument(what);
    }
}

inline void require_size(Eigen::Index actual, Eigen::Index expected, const char* what) {
    if (actual != expected) {
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(expected) + ", got " +
                                    std::to_string(actual));
    }
}

} // namespace detail
} // namespace acerac
