// bath.hpp: Continuum spectral densities, reorganisation energy and the
// finite harmonic bath obtained by binning J(omega).
//
// Units: hbar = k_B = 1, mode masses m_k = 1.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "meanforce/errors.hpp"

namespace meanforce {

enum class SpectralFamily { ohmic_exponential };

// J_g(omega) = 2 g^2 omega exp(-omega / omega_c).
struct SpectralDensity {
    SpectralFamily family = SpectralFamily::ohmic_exponential;
    double g = 0.0;
    double cutoff = 1.0;

    static SpectralDensity ohmic_exponential(double g, double cutoff) {
        if (!(g >= 0.0)) throw ContractViolation("spectral density: g must be >= 0");
        if (!(cutoff > 0.0)) throw ContractViolation("spectral density: omega_c must be > 0");
        return {SpectralFamily::ohmic_exponential, g, cutoff};
    }

    // J / g^2: everything except the coupling prefactor.
    double shape(double omega) const { return 2.0 * omega * std::exp(-omega / cutoff); }

    // J(omega) / (g^2 omega), finite at omega = 0.
    double shape_over_omega(double omega) const { return 2.0 * std::exp(-omega / cutoff); }
};

inline double eval_spectral(const SpectralDensity& j, double omega) {
    if (!(omega >= 0.0))
        throw ContractViolation("eval_spectral: omega must be >= 0, got " + std::to_string(omega));
    return j.g * j.g * j.shape(omega);
}

namespace detail {

template <class F>
double half_line_integral(F&& f, double rel_tol, const char* what) {
    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0.0;
    double l1 = 0.0;
    const double value = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(),
                                              rel_tol * 1e-2, &error, &l1);
    if (!std::isfinite(value) || error > rel_tol * std::abs(l1))
        throw NumericalError(std::string(what) + ": quadrature did not converge (error " +
                             std::to_string(error) + ")");
    return value;
}

} // namespace detail

// lambda = (1/pi) int_0^inf J(omega)/omega d omega.
// g enters only as the prefactor, so lambda(g) = g^2 lambda(1) bit for bit.
inline double lambda_continuum(const SpectralDensity& j) {
    if (j.g == 0.0) return 0.0;
    const double shape_integral = detail::half_line_integral(
        [&](double w) { return j.shape_over_omega(w); }, 1e-12, "lambda_continuum");
    return j.g * j.g * (shape_integral / std::numbers::pi);
}

struct BathMode {
    double frequency = 0.0;   // omega_k
    double coupling_sq = 0.0; // c_k^2
    double bin_width = 0.0;   // Delta omega_k
};

// Finite harmonic bath. lambda_disc = sum_k c_k^2 / (2 omega_k^2) is computed
// once on construction and kept with the modes.
class DiscretizedBath {
public:
    DiscretizedBath() = default;

    explicit DiscretizedBath(std::vector<BathMode> modes) : modes_(std::move(modes)) {
        for (std::size_t k = 0; k < modes_.size(); ++k) {
            const auto& m = modes_[k];
            if (!(m.frequency > 0.0)) throw ContractViolation("bath: mode frequency must be > 0");
            if (!(m.coupling_sq >= 0.0)) throw ContractViolation("bath: c_k^2 must be >= 0");
            if (!(m.bin_width > 0.0)) throw ContractViolation("bath: bin width must be > 0");
            if (k > 0 && !(m.frequency > modes_[k - 1].frequency))
                throw ContractViolation("bath: frequencies must be strictly increasing");
        }
        lambda_ = sum_lambda(modes_);
    }

    const std::vector<BathMode>& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    double lambda() const { return lambda_; }

    static double sum_lambda(const std::vector<BathMode>& modes) {
        double s = 0.0;
        for (const auto& m : modes) s += mode_lambda(m);
        return s;
    }
    static double mode_lambda(const BathMode& m) {
        return m.coupling_sq / (2.0 * m.frequency * m.frequency);
    }

private:
    std::vector<BathMode> modes_;
    double lambda_ = 0.0;
};

enum class BinningScheme { midpoint };

// K equal-width bins on (0, omega_max], modes at bin centres, and
// c_k^2 = (2/pi) J(omega_k) omega_k Delta omega.
inline DiscretizedBath discretize(const SpectralDensity& j, int num_modes, double omega_max,
                                  BinningScheme scheme = BinningScheme::midpoint) {
    if (num_modes < 1) throw ContractViolation("discretize: need at least one mode");
    if (!(omega_max > 0.0)) throw ContractViolation("discretize: omega_max must be > 0");
    (void)scheme;
    const double width = omega_max / num_modes;
    std::vector<BathMode> modes;
    modes.reserve(static_cast<std::size_t>(num_modes));
    for (int k = 0; k < num_modes; ++k) {
        const double w = (k + 0.5) * width;
        const double c2 = (2.0 / std::numbers::pi) * eval_spectral(j, w) * w * width;
        modes.push_back({w, c2, width});
    }
    return DiscretizedBath(std::move(modes));
}

// Recomputed from the modes, independent of the cached value.
inline double lambda_disc(const DiscretizedBath& bath) {
    return DiscretizedBath::sum_lambda(bath.modes());
}

} // namespace meanforce
