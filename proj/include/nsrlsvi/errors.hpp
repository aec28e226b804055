#pragma once

#include <stdexcept>
#include <string>

namespace nsrlsvi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Frank-Wolfe could not produce a certified design.
class DesignError : public Error {
public:
    DesignError(const std::string& what, double best_g = 0.0) : Error(what), best_g_(best_g) {}
    double best_g() const noexcept { return best_g_; }

private:
    double best_g_;
};

/// A squared-loss oracle could not produce a point (its premise was violated).
class OracleFailure : public Error {
public:
    using Error::Error;
};

/// A caller-supplied component broke its contract, e.g. a separation oracle
/// returned a hyperplane that does not exclude the query point.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// The ball walk stopped accepting proposals.
class StallError : public Error {
public:
    using Error::Error;
};

/// A runtime invariant of the learner or an environment was falsified.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Environment fileification failed validation.
class EnvError : public Error {
public:
    using Error::Error;
};

}  // namespace nsrlsvi
