#pragma once

#include <stdexcept>
#include <string>

namespace evmchaos {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter combinations outside the supported regime (e.g. overdamped motion).
class UnsupportedRegime : public Error {
public:
    explicit UnsupportedRegime(const std::string& what) : Error(what) {}
};

/// Adaptive quadrature failed to reach the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what), achieved_rel_error(achieved) {}
    double achieved_rel_error;  ///< best relative error reached before giving up
};

/// Newton iteration (fixed points, periodic orbits) did not converge.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual(residual) {}
    double residual;  ///< final residual norm
};

/// A root/threshold bracket does not straddle the sought transition.
class BracketError : public Error {
public:
    BracketError(const std::string& what, double lo_value, double hi_value)
        : Error(what), value_lo(lo_value), value_hi(hi_value) {}
    double value_lo;  ///< classifying quantity at the lower endpoint
    double value_hi;  ///< classifying quantity at the upper endpoint
};

/// Scaling fit rejected its input (too few points, nonpositive shifts, ...).
class ScalingError : public Error {
public:
    explicit ScalingError(const std::string& what) : Error(what) {}
};

}  // namespace evmchaos
