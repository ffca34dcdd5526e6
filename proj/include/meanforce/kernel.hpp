// kernel.hpp: Euclidean influence kernel K(tau), its covariance matrix on the
// imaginary-time midpoint grid, and the integrated variance C(beta).

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "meanforce/bath.hpp"
#include "meanforce/errors.hpp"
#include "meanforce/system_model.hpp"

namespace meanforce {

// N slices of width beta/N; field values live at the slice midpoints.
class TimeGrid {
public:
    TimeGrid(double beta, int slices) : beta_(beta), slices_(slices) {
        if (!(beta > 0.0)) throw ContractViolation("time grid: beta must be > 0");
        if (slices < 1) throw ContractViolation("time grid: need at least one slice");
    }

    double beta() const { return beta_; }
    int slices() const { return slices_; }
    double spacing() const { return beta_ / slices_; }
    double midpoint(int j) const { return (j + 0.5) * spacing(); }

private:
    double beta_;
    int slices_;
};

namespace detail {

// cosh[w(beta/2 - |tau|)] / sinh(beta w / 2), written without overflow.
inline double thermal_profile(double omega, double abs_tau, double beta) {
    return (std::exp(-omega * abs_tau) + std::exp(-omega * (beta - abs_tau))) /
           (-std::expm1(-beta * omega));
}

inline double checked_abs_tau(double tau, double beta) {
    const double a = std::abs(tau);
    if (a > beta * (1.0 + 1e-14))
        throw ContractViolation("kernel: |tau| = " + std::to_string(a) + " exceeds beta");
    return std::min(a, beta);
}

} // namespace detail

// K(tau) = sum_k c_k^2/(2 omega_k) cosh[omega_k(beta/2-|tau|)] / sinh(beta omega_k/2)
inline double kernel_discrete(const DiscretizedBath& bath, double tau, double beta) {
    const double a = detail::checked_abs_tau(tau, beta);
    double k = 0.0;
    for (const auto& m : bath.modes())
        k += m.coupling_sq / (2.0 * m.frequency) * detail::thermal_profile(m.frequency, a, beta);
    return k;
}

// Continuum kernel by adaptive quadrature over omega.
inline double kernel_continuum(const SpectralDensity& j, double tau, double beta) {
    if (!(beta > 0.0)) throw ContractViolation("kernel: beta must be > 0");
    const double a = detail::checked_abs_tau(tau, beta);
    if (j.g == 0.0) return 0.0;
    const auto integrand = [&](double w) {
        if (w == 0.0) return j.shape_over_omega(0.0) * 2.0 / beta;
        return j.shape(w) * detail::thermal_profile(w, a, beta);
    };
    const double integral = detail::half_line_integral(integrand, 1e-8, "kernel_continuum");
    return j.g * j.g * integral / std::numbers::pi;
}

// Sigma_ij = K(tau_i - tau_j). Stationary, so Toeplitz by construction.
struct KernelMatrix {
    TimeGrid grid;
    RealMatrix covariance;
};

inline KernelMatrix covariance_matrix(const DiscretizedBath& bath, const TimeGrid& grid) {
    const int n = grid.slices();
    Eigen::VectorXd lag(n);
    for (int m = 0; m < n; ++m) lag(m) = kernel_discrete(bath, m * grid.spacing(), grid.beta());
    RealMatrix sigma(n, n);
    for (int i = 0; i < n; ++i)
        for (int jdx = 0; jdx < n; ++jdx) sigma(i, jdx) = lag(std::abs(i - jdx));
    return {grid, std::move(sigma)};
}

// C(beta) = int int K(tau - tau') = 2 beta lambda_disc.
inline double c_beta(const DiscretizedBath& bath, double beta) {
    if (!(beta > 0.0)) throw ContractViolation("c_beta: beta must be > 0");
    return 2.0 * beta * bath.lambda();
}

// The same double integral evaluated by nested adaptive Gauss-Kronrod
// quadrature of the mode-sum kernel; the inner integral is split at the
// cusp tau' = tau.
inline double c_beta_quadrature(const DiscretizedBath& bath, double beta, double rel_tol = 1e-10) {
    if (!(beta > 0.0)) throw ContractViolation("c_beta: beta must be > 0");
    using boost::math::quadrature::gauss_kronrod;
    const auto k = [&](double s) { return kernel_discrete(bath, s, beta); };
    const auto inner = [&](double tau) {
        double e1 = 0.0, e2 = 0.0;
        const double left = tau > 0.0
            ? gauss_kronrod<double, 31>::integrate([&](double tp) { return k(tau - tp); }, 0.0,
                                                    tau, 12, rel_tol * 1e-2, &e1)
            : 0.0;
        const double right = tau < beta
            ? gauss_kronrod<double, 31>::integrate([&](double tp) { return k(tp - tau); }, tau,
                                                    beta, 12, rel_tol * 1e-2, &e2)
            : 0.0;
        return left + right;
    };
    double err = 0.0;
    const double value = gauss_kronrod<double, 31>::integrate(inner, 0.0, beta, 12, rel_tol * 1e-2,
                                                               &err);
    if (!std::isfinite(value) || err > rel_tol * std::abs(value) + 1e-300)
        throw NumericalError("c_beta_quadrature: nested quadrature did not converge");
    return value;
}

} // namespace meanforce
