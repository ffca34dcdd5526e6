// edref.hpp: Exact finite-bath references for the reduced equilibrium state.
//
//   displaced_trace_reduced  closed-form trace over displaced oscillators
//                            (commuting systems, no truncation)
//   fock_ed_reduced          brute-force exact diagonalization of
//                            H_tot = H_Q + sum_k omega_k n_k + f sum_k c_k x_k
//                            on a truncated Fock space, then Tr_B
//
// x_k = (a_k + a_k^dagger) / sqrt(2 omega_k) with m_k = 1, so the static
// shift per level is -f_n^2 sum_k c_k^2 / (2 omega_k^2) = -lambda_disc f_n^2.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "meanforce/bath.hpp"
#include "meanforce/errors.hpp"
#include "meanforce/system_model.hpp"

namespace meanforce {

struct FockConfig {
    int n_max = 8;                     // per-mode truncation (levels 0..n_max)
    int modes_used = 3;                // K_used
    std::int64_t memory_budget = 20000; // bound on d (n_max+1)^K_used
    double min_beta_omega = 2.0;       // thermal-resolvability guard for mode selection
    double tolerance = 1e-6;           // truncation residual regarded as converged
    bool strict = false;               // throw ConvergenceWarning instead of reporting
};

namespace detail {

inline double log_sum_exp(const RealVector& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

inline HermitianOperator state_from_log_weights(const ComplexMatrix& basis,
                                                const RealVector& log_w) {
    const RealVector p = (log_w.array() - log_sum_exp(log_w)).exp().matrix();
    return from_spectrum(basis, p);
}

} // namespace detail

// Populations proportional to exp(-beta E_n + beta f_n^2 sum_k c_k^2/(2 omega_k^2)),
// summed mode by mode from the displaced-oscillator ground shifts.
inline HermitianOperator displaced_trace_reduced(const SystemModel& sys, const DiscretizedBath& bath,
                                                 double beta) {
    if (!sys.commuting())
        throw ContractViolation("displaced_trace_reduced: requires [H_Q, f] = 0");
    if (!(beta > 0.0)) throw ContractViolation("displaced_trace_reduced: beta must be > 0");
    const CommonEigenbasis basis = common_eigenbasis(sys);
    RealVector log_w(basis.energies.size());
    for (Eigen::Index n = 0; n < log_w.size(); ++n) {
        const double fn = basis.coupling_values(n);
        double shift = 0.0;
        for (const auto& m : bath.modes())
            shift += fn * fn * m.coupling_sq / (2.0 * m.frequency * m.frequency);
        log_w(n) = -beta * (basis.energies(n) - shift);
    }
    return detail::state_from_log_weights(basis.vectors, log_w);
}

// Picks K_used modes for exact diagonalization: among modes with
// beta omega >= min_beta_omega, those contributing most to lambda; if too few
// qualify, the highest-frequency remaining modes fill in. The selected
// couplings are rescaled so the subset reproduces the full lambda_disc.
inline DiscretizedBath select_ed_modes(const DiscretizedBath& bath, const FockConfig& cfg,
                                       double beta) {
    if (cfg.modes_used < 1) throw ContractViolation("select_ed_modes: K_used must be >= 1");
    const auto& modes = bath.modes();
    if (modes.size() <= static_cast<std::size_t>(cfg.modes_used)) return bath;

    std::vector<std::size_t> order(modes.size());
    std::iota(order.begin(), order.end(), 0);
    const auto eligible = [&](std::size_t k) {
        return beta * modes[k].frequency >= cfg.min_beta_omega;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (eligible(a) != eligible(b)) return eligible(a);
        if (eligible(a))
            return DiscretizedBath::mode_lambda(modes[a]) > DiscretizedBath::mode_lambda(modes[b]);
        return modes[a].frequency > modes[b].frequency;
    });
    order.resize(static_cast<std::size_t>(cfg.modes_used));
    std::sort(order.begin(), order.end());

    std::vector<BathMode> picked;
    for (std::size_t k : order) picked.push_back(modes[k]);
    const double sub = DiscretizedBath::sum_lambda(picked);
    if (sub > 0.0) {
        const double scale = bath.lambda() / sub;
        for (auto& m : picked) m.coupling_sq *= scale;
    }
    return DiscretizedBath(std::move(picked));
}

namespace detail {

struct BathOperators {
    RealMatrix free;       // sum_k omega_k n_k
    RealMatrix coordinate; // sum_k c_k x_k
};

inline RealMatrix embed(const RealMatrix& op, std::size_t slot, std::size_t modes, int levels) {
    RealMatrix out = RealMatrix::Identity(1, 1);
    for (std::size_t k = 0; k < modes; ++k) {
        const RealMatrix factor = k == slot ? op : RealMatrix::Identity(levels, levels);
        RealMatrix next = Eigen::kroneckerProduct(out, factor);
        out = std::move(next);
    }
    return out;
}

inline BathOperators bath_operators(const DiscretizedBath& bath, int n_max) {
    const int levels = n_max + 1;
    RealMatrix lower = RealMatrix::Zero(levels, levels); // annihilation a
    RealMatrix number = RealMatrix::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) lower(n - 1, n) = std::sqrt(static_cast<double>(n));
    for (int n = 0; n < levels; ++n) number(n, n) = n;
    const RealMatrix position = lower + lower.transpose();

    const std::size_t k_modes = bath.size();
    Eigen::Index dim = 1;
    for (std::size_t k = 0; k < k_modes; ++k) dim *= levels;
    BathOperators ops{RealMatrix::Zero(dim, dim), RealMatrix::Zero(dim, dim)};
    for (std::size_t k = 0; k < k_modes; ++k) {
        const auto& m = bath.modes()[k];
        ops.free += m.frequency * embed(number, k, k_modes, levels);
        ops.coordinate += std::sqrt(m.coupling_sq) / std::sqrt(2.0 * m.frequency) *
                          embed(position, k, k_modes, levels);
    }
    return ops;
}

// Exact log Tr e^{-beta H_B(f)} for untruncated displaced oscillators.
inline double displaced_log_partition(const DiscretizedBath& bath, double f, double beta) {
    double s = 0.0;
    for (const auto& m : bath.modes())
        s += -std::log(-std::expm1(-beta * m.frequency)) +
             beta * f * f * DiscretizedBath::mode_lambda(m);
    return s;
}

} // namespace detail

struct FockReduced {
    HermitianOperator state;
    double residual = 0.0; // truncation residual (see fock_ed_reduced)
    bool converged = true;
    DiscretizedBath modes; // the bath actually diagonalized
};

// Partial trace keeping factor `keep` of a tensor product with the given
// dimensions (first factor most significant, Kronecker ordering).
inline HermitianOperator partial_trace(const HermitianOperator& op, const std::vector<int>& dims,
                                       std::size_t keep) {
    if (dims.empty() || keep >= dims.size())
        throw ContractViolation("partial_trace: keep index out of range");
    Eigen::Index total = 1;
    for (int d : dims) {
        if (d < 1) throw ContractViolation("partial_trace: factor dimensions must be >= 1");
        total *= d;
    }
    if (total != op.dim())
        throw DimensionMismatch("partial_trace: product of dims " + std::to_string(total) +
                                " != operator dimension " + std::to_string(op.dim()));
    std::vector<Eigen::Index> stride(dims.size(), 1);
    for (std::size_t k = dims.size() - 1; k > 0; --k) stride[k - 1] = stride[k] * dims[k];

    const Eigen::Index kept = dims[keep];
    const Eigen::Index rest = total / kept;
    // offset of each "rest" multi-index (all digits except `keep`)
    std::vector<Eigen::Index> offsets(static_cast<std::size_t>(rest));
    for (Eigen::Index r = 0; r < rest; ++r) {
        Eigen::Index rem = r, off = 0;
        for (std::size_t k = dims.size(); k-- > 0;) {
            if (k == keep) continue;
            off += (rem % dims[k]) * stride[k];
            rem /= dims[k];
        }
        offsets[static_cast<std::size_t>(r)] = off;
    }
    ComplexMatrix out = ComplexMatrix::Zero(kept, kept);
    const ComplexMatrix& m = op.matrix();
    for (Eigen::Index i = 0; i < kept; ++i)
        for (Eigen::Index j = 0; j < kept; ++j)
            for (Eigen::Index off : offsets)
                out(i, j) += m(i * stride[keep] + off, j * stride[keep] + off);
    return enforce_hermitian(out);
}

// Truncated-Fock exact diagonalization. For diagonal systems the total
// Hamiltonian is block diagonal over system levels and only the bath block
// spectra are needed; the residual is then the spread over blocks of
// log Z_trunc - log Z_exact, which bounds the error of every log population
// ratio (a common offset cancels on normalization). Otherwise the full product space is exponentiated and the
// residual is the thermal weight on states with any mode at n_max.
inline FockReduced fock_ed_reduced(const SystemModel& sys, const DiscretizedBath& bath,
                                   const FockConfig& cfg, double beta) {
    if (cfg.n_max < 0) throw ContractViolation("fock_ed_reduced: n_max must be >= 0");
    if (!(beta > 0.0)) throw ContractViolation("fock_ed_reduced: beta must be > 0");
    FockReduced out;
    out.modes = select_ed_modes(bath, cfg, beta);
    const int levels = cfg.n_max + 1;
    const std::size_t k_modes = out.modes.size();
    std::int64_t bath_dim = 1;
    for (std::size_t k = 0; k < k_modes; ++k) bath_dim *= levels;
    if (sys.dim() * bath_dim > cfg.memory_budget)
        throw ContractViolation("fock_ed_reduced: dimension " +
                                std::to_string(sys.dim() * bath_dim) + " exceeds memory budget " +
                                std::to_string(cfg.memory_budget));

    const detail::BathOperators ops = detail::bath_operators(out.modes, cfg.n_max);

    if (sys.diagonal()) {
        const RealVector e = sys.energies();
        const RealVector f = sys.coupling().real_diagonal();
        std::map<double, double> log_z; // per distinct coupling eigenvalue
        double err_lo = INFINITY, err_hi = -INFINITY;
        for (Eigen::Index n = 0; n < f.size(); ++n) {
            if (log_z.contains(f(n))) continue;
            const RealMatrix block = ops.free + f(n) * ops.coordinate;
            const Eigen::SelfAdjointEigenSolver<RealMatrix> es(block, Eigen::EigenvaluesOnly);
            if (es.info() != Eigen::Success)
                throw NumericalError("fock_ed_reduced: bath block diagonalization failed");
            const double lz = detail::log_sum_exp(-beta * es.eigenvalues());
            log_z[f(n)] = lz;
            const double err = lz - detail::displaced_log_partition(out.modes, f(n), beta);
            err_lo = std::min(err_lo, err);
            err_hi = std::max(err_hi, err);
        }
        RealVector log_w(e.size());
        for (Eigen::Index n = 0; n < e.size(); ++n) log_w(n) = -beta * e(n) + log_z.at(f(n));
        out.state = detail::state_from_log_weights(
            ComplexMatrix::Identity(sys.dim(), sys.dim()), log_w);
        out.residual = err_hi - err_lo;
    } else {
        const Eigen::Index bd = bath_dim;
        const ComplexMatrix h_tot =
            Eigen::kroneckerProduct(sys.hamiltonian().matrix(), ComplexMatrix::Identity(bd, bd))
                .eval() +
            Eigen::kroneckerProduct(ComplexMatrix::Identity(sys.dim(), sys.dim()),
                                    ops.free.cast<Complex>())
                .eval() +
            Eigen::kroneckerProduct(sys.coupling().matrix(), ops.coordinate.cast<Complex>()).eval();
        const ScaledExponential full = herm_expm_scaled(HermitianOperator::from_matrix(h_tot), -beta);
        std::vector<int> dims{static_cast<int>(sys.dim())};
        for (std::size_t k = 0; k < k_modes; ++k) dims.push_back(levels);
        out.state = normalized(partial_trace(full.scaled, dims, 0));

        // weight on bath basis states with some mode at the truncation edge
        const double total = trace_real(full.scaled);
        double edge = 0.0;
        for (Eigen::Index s = 0; s < sys.dim(); ++s)
            for (Eigen::Index b = 0; b < bd; ++b) {
                Eigen::Index rem = b;
                bool at_edge = false;
                for (std::size_t k = 0; k < k_modes; ++k) {
                    at_edge = at_edge || (rem % levels == cfg.n_max);
                    rem /= levels;
                }
                if (at_edge) edge += full.scaled(s * bd + b, s * bd + b).real();
            }
        out.residual = k_modes == 0 ? 0.0 : edge / total;
    }
    out.converged = out.residual <= cfg.tolerance;
    if (!out.converged && cfg.strict)
        throw ConvergenceWarning("fock_ed_reduced: truncation residual " +
                                     std::to_string(out.residual) + " above tolerance",
                                 out.residual);
    return out;
}

} // namespace meanforce
