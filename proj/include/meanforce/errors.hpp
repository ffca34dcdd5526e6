// errors.hpp: Exception types shared by all meanforce modules

#pragma once

#include <stdexcept>
#include <string>

namespace meanforce {

// A caller broke a documented precondition (wrong dimensions, non-commuting
// input to a commuting-only routine, invalid parameters).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class DimensionMismatch : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

// Eigen-decomposition failure, Hermiticity drift, quadrature non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A density estimate that should be positive definite is not. Downstream this
// almost always means the Monte Carlo sample budget is too small.
class PositivityError : public std::runtime_error {
public:
    PositivityError(const std::string& what, double smallest)
        : std::runtime_error(what), smallest_eigenvalue(smallest) {}

    double smallest_eigenvalue;
};

class IndefiniteCovarianceError : public std::runtime_error {
public:
    IndefiniteCovarianceError(const std::string& what, double clipped)
        : std::runtime_error(what), clipped_mass(clipped) {}

    double clipped_mass;
};

class SingularBasisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by the Fock-space reference only in strict mode; otherwise the
// residual is reported alongside the result.
class ConvergenceWarning : public std::runtime_error {
public:
    ConvergenceWarning(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}

    double residual;
};

// A statistical acceptance check failed (estimate outside its error band).
class StatisticalConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace meanforce
