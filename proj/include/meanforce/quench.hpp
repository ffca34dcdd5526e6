// quench.hpp: The quenched imaginary-time propagator for one noise
// realization, U = T exp[-int_0^beta (H_Q - xi(tau) f) d tau].
//
// Three tiers:
//   quenched_propagator   general time-ordered slice product (N matrix exps)
//   diagonal_propagator   H_Q and f both diagonal: elementwise slices
//   commuting_propagator  [H_Q, f] = 0: depends on the path only through X
// propagate() picks the cheapest tier valid for the system.

#pragma once

#include <cmath>

#include "meanforce/noise.hpp"
#include "meanforce/system_model.hpp"

namespace meanforce {

struct QuenchedSample {
    ComplexMatrix propagator;
    double integrated_field = 0.0;
};

// Each slice exponentiates the full generator H_Q - xi_j f exactly; later
// imaginary times multiply from the left.
inline QuenchedSample quenched_propagator(const SystemModel& sys, const NoisePath& path) {
    const double delta = path.grid.spacing();
    const auto n = path.values.size();
    ComplexMatrix u = ComplexMatrix::Identity(sys.dim(), sys.dim());
    for (Eigen::Index j = 0; j < n; ++j) {
        const HermitianOperator generator = sys.hamiltonian() - path.values(j) * sys.coupling();
        u = herm_expm(generator, -delta).matrix() * u;
    }
    return {std::move(u), integrated_field(path)};
}

inline QuenchedSample diagonal_propagator(const SystemModel& sys, const NoisePath& path) {
    if (!sys.diagonal()) throw ContractViolation("diagonal_propagator: system is not diagonal");
    const double delta = path.grid.spacing();
    const RealVector e = sys.energies();
    const RealVector f = sys.coupling().real_diagonal();
    RealVector exponent = RealVector::Zero(e.size());
    for (Eigen::Index j = 0; j < path.values.size(); ++j)
        exponent += -delta * (e - path.values(j) * f);
    ComplexMatrix u = exponent.array().exp().matrix().cast<Complex>().asDiagonal();
    return {std::move(u), integrated_field(path)};
}

// e^{-beta H_Q} e^{f X}, evaluated in the common eigenbasis.
inline QuenchedSample commuting_propagator(const SystemModel& sys, double x, double beta) {
    if (!sys.commuting())
        throw ContractViolation("commuting_propagator: [H_Q, f] != 0 for this system");
    if (sys.diagonal()) {
        const RealVector w =
            (-beta * sys.energies().array() + x * sys.coupling().real_diagonal().array()).exp();
        return {w.cast<Complex>().asDiagonal(), x};
    }
    const CommonEigenbasis basis = common_eigenbasis(sys);
    const RealVector w =
        (-beta * basis.energies.array() + x * basis.coupling_values.array()).exp();
    return {from_spectrum(basis.vectors, w).matrix(), x};
}

// (U + U^dagger)/2. The time-reversed path is equally likely and yields U^dagger,
// so this preserves the mean.
inline QuenchedSample hermitize(QuenchedSample sample) {
    sample.propagator = 0.5 * (sample.propagator + sample.propagator.adjoint()).eval();
    return sample;
}

inline QuenchedSample propagate(const SystemModel& sys, const NoisePath& path) {
    if (sys.diagonal()) return diagonal_propagator(sys, path);
    if (sys.commuting())
        return commuting_propagator(sys, integrated_field(path), path.grid.beta());
    return quenched_propagator(sys, path);
}

} // namespace meanforce
