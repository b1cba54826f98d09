#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Jet division by a value coefficient below the machine floor (1e-300).
struct SingularJetError : Error {
    using Error::Error;
};

/// Argument outside the admissible domain; the message names the violated constraint.
struct DomainError : Error {
    using Error::Error;
};

/// One of the scalar-cascade denominators vanished; the message names which.
struct SingularScalarError : Error {
    using Error::Error;
};

/// Adaptive quadrature failed to reach the requested tolerance.
struct QuadratureError : Error {
    QuadratureError(const std::string& what, double achieved)
        : Error(what), achieved_estimate(achieved) {}
    double achieved_estimate;
};

/// Metric matrix not invertible at the evaluation point.
struct NonInvertibleMetricError : Error {
    NonInvertibleMetricError(const std::string& what, double cond)
        : Error(what), condition_estimate(cond) {}
    double condition_estimate;
};

/// A computation route's precondition is not met (e.g. closed-conformal check fails).
struct RouteUnavailableError : Error {
    using Error::Error;
};

} // namespace finsler
