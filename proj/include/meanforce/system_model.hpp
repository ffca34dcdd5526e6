// system_model.hpp: Hermitian operators, dense matrix functions and the
// finite-dimensional system (H_Q, coupling f) the bath acts on.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "meanforce/errors.hpp"

namespace meanforce {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

namespace detail {

inline double max_abs(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const ComplexMatrix& m) {
    return max_abs(m - m.adjoint());
}

} // namespace detail

// Dense self-adjoint matrix. Construction checks conjugate symmetry and stores
// the symmetrized (M + M^dagger)/2.
class HermitianOperator {
public:
    static constexpr double kConstructionTolerance = 1e-12;
    static constexpr double kDriftTolerance = 1e-10;

    HermitianOperator() = default;

    static HermitianOperator from_matrix(const ComplexMatrix& m,
                                         double rel_tol = kConstructionTolerance) {
        if (m.rows() != m.cols())
            throw DimensionMismatch("HermitianOperator: matrix is not square");
        if (m.rows() < 1)
            throw ContractViolation("HermitianOperator: dimension must be >= 1");
        const double scale = detail::max_abs(m);
        const double defect = detail::hermiticity_defect(m);
        if (defect > rel_tol * scale)
            throw ContractViolation("HermitianOperator: matrix is not Hermitian (defect " +
                                    std::to_string(defect) + ")");
        HermitianOperator h;
        h.m_ = 0.5 * (m + m.adjoint());
        return h;
    }

    static HermitianOperator from_real(const RealMatrix& m) {
        return from_matrix(m.cast<Complex>());
    }

    static HermitianOperator diagonal(const RealVector& d) {
        if (d.size() < 1) throw ContractViolation("HermitianOperator: empty diagonal");
        HermitianOperator h;
        h.m_ = d.cast<Complex>().asDiagonal();
        return h;
    }

    static HermitianOperator identity(Eigen::Index dim) {
        return diagonal(RealVector::Ones(dim));
    }

    static HermitianOperator zero(Eigen::Index dim) { return diagonal(RealVector::Zero(dim)); }

    static HermitianOperator projector(Eigen::Index dim, Eigen::Index level) {
        if (level < 0 || level >= dim) throw ContractViolation("projector level out of range");
        RealVector d = RealVector::Zero(dim);
        d(level) = 1.0;
        return diagonal(d);
    }

    Eigen::Index dim() const { return m_.rows(); }
    const ComplexMatrix& matrix() const { return m_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    RealVector real_diagonal() const { return m_.diagonal().real(); }

    bool is_diagonal(double abs_tol = 0.0) const {
        ComplexMatrix off = m_;
        off.diagonal().setZero();
        return detail::max_abs(off) <= abs_tol;
    }

    friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
        check_same_dim(a, b);
        HermitianOperator h;
        h.m_ = a.m_ + b.m_;
        return h;
    }
    friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
        check_same_dim(a, b);
        HermitianOperator h;
        h.m_ = a.m_ - b.m_;
        return h;
    }
    friend HermitianOperator operator*(double s, const HermitianOperator& a) {
        HermitianOperator h;
        h.m_ = s * a.m_;
        return h;
    }
    HermitianOperator shifted(double c) const {
        HermitianOperator h = *this;
        h.m_.diagonal().array() += c;
        return h;
    }

    static void check_same_dim(const HermitianOperator& a, const HermitianOperator& b) {
        if (a.dim() != b.dim())
            throw DimensionMismatch("operator dimensions differ: " + std::to_string(a.dim()) +
                                    " vs " + std::to_string(b.dim()));
    }

private:
    ComplexMatrix m_;
};

// Symmetrize the output of a matrix-function evaluation. Drift beyond the
// relative tolerance is reported, not repaired.
inline HermitianOperator enforce_hermitian(const ComplexMatrix& m,
                                           double rel_tol = HermitianOperator::kDriftTolerance) {
    const double scale = detail::max_abs(m);
    const double defect = detail::hermiticity_defect(m);
    if (defect > rel_tol * scale)
        throw NumericalError("Hermiticity drift " + std::to_string(defect / scale) +
                             " exceeds tolerance");
    return HermitianOperator::from_matrix(m, rel_tol);
}

struct Spectrum {
    RealVector values;     // ascending
    ComplexMatrix vectors; // columns are eigenvectors
};

inline Spectrum spectrum(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix());
    if (es.info() != Eigen::Success)
        throw NumericalError("eigen-decomposition did not converge (corrupted input?)");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline HermitianOperator from_spectrum(const ComplexMatrix& vectors, const RealVector& values) {
    const ComplexMatrix m = vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint();
    return enforce_hermitian(m);
}

// e^{sH} = e^{log_scale} * scaled, with the largest eigenvalue of `scaled`
// equal to one. Used wherever absolute scale matters and exp may overflow.
struct ScaledExponential {
    HermitianOperator scaled;
    double log_scale = 0.0;
};

inline ScaledExponential herm_expm_scaled(const HermitianOperator& h, double s) {
    const Spectrum sp = spectrum(h);
    const RealVector exponent = s * sp.values;
    const double shift = exponent.maxCoeff();
    const RealVector factors = (exponent.array() - shift).exp().matrix();
    return {from_spectrum(sp.vectors, factors), shift};
}

inline HermitianOperator herm_expm(const HermitianOperator& h, double s) {
    const Spectrum sp = spectrum(h);
    const RealVector factors = (s * sp.values).array().exp().matrix();
    return from_spectrum(sp.vectors, factors);
}

// Principal logarithm of a positive-definite operator.
inline HermitianOperator herm_logm(const HermitianOperator& rho) {
    const Spectrum sp = spectrum(rho);
    const double smallest = sp.values.minCoeff();
    if (!(smallest > 0.0))
        throw PositivityError("herm_logm: non-positive eigenvalue " + std::to_string(smallest),
                              smallest);
    return from_spectrum(sp.vectors, sp.values.array().log().matrix());
}

// Hilbert-Schmidt inner product Tr(A^dagger B).
inline Complex hs_inner(const HermitianOperator& a, const HermitianOperator& b) {
    HermitianOperator::check_same_dim(a, b);
    return (a.matrix().conjugate().array() * b.matrix().array()).sum();
}

inline double hs_norm(const ComplexMatrix& m) { return m.norm(); }

inline HermitianOperator gibbs_state(const HermitianOperator& h, double beta) {
    if (!(beta > 0.0)) throw ContractViolation("gibbs_state: beta must be positive");
    const Spectrum sp = spectrum(h);
    const double e_min = sp.values.minCoeff();
    RealVector weights = (-beta * (sp.values.array() - e_min)).exp().matrix();
    weights /= weights.sum();
    return from_spectrum(sp.vectors, weights);
}

// log Tr e^{-beta H}, evaluated with the spectrum shifted by its minimum.
inline double log_partition(const HermitianOperator& h, double beta) {
    const Spectrum sp = spectrum(h);
    const double e_min = sp.values.minCoeff();
    return std::log((-beta * (sp.values.array() - e_min)).exp().sum()) - beta * e_min;
}

inline double trace_real(const HermitianOperator& h) { return h.matrix().trace().real(); }

inline HermitianOperator normalized(const HermitianOperator& h) {
    const double tr = trace_real(h);
    if (!(tr > 0.0)) throw PositivityError("cannot normalize operator with non-positive trace", tr);
    return (1.0 / tr) * h;
}

// ---------------------------------------------------------------------------

struct ProjectorCoupling {
    Eigen::Index level = 0;
};

using CouplingSpec = std::variant<ProjectorCoupling, HermitianOperator>;

// H_Q together with the operator f it couples to the bath through.
class SystemModel {
public:
    static constexpr double kCommutatorTolerance = 1e-12;

    SystemModel(HermitianOperator hamiltonian, HermitianOperator coupling)
        : hamiltonian_(std::move(hamiltonian)), coupling_(std::move(coupling)) {
        if (hamiltonian_.dim() != coupling_.dim())
            throw DimensionMismatch("system: coupling dimension " +
                                    std::to_string(coupling_.dim()) +
                                    " does not match Hamiltonian dimension " +
                                    std::to_string(hamiltonian_.dim()));
        const ComplexMatrix& h = hamiltonian_.matrix();
        const ComplexMatrix& f = coupling_.matrix();
        commutator_norm_ = hs_norm(h * f - f * h);
        commuting_ = commutator_norm_ <= kCommutatorTolerance * hs_norm(h) * hs_norm(f);
        diagonal_ = hamiltonian_.is_diagonal() && coupling_.is_diagonal();
    }

    Eigen::Index dim() const { return hamiltonian_.dim(); }
    const HermitianOperator& hamiltonian() const { return hamiltonian_; }
    const HermitianOperator& coupling() const { return coupling_; }
    RealVector energies() const { return hamiltonian_.real_diagonal(); }
    bool commuting() const { return commuting_; }
    bool diagonal() const { return diagonal_; }
    double commutator_norm() const { return commutator_norm_; }

    HermitianOperator coupling_squared() const {
        return enforce_hermitian(coupling_.matrix() * coupling_.matrix());
    }

    // H_Q + lambda f^2: the counterterm that the bath-induced shift cancels.
    SystemModel with_counterterm(double lambda) const {
        return SystemModel(hamiltonian_ + lambda * coupling_squared(), coupling_);
    }

private:
    HermitianOperator hamiltonian_;
    HermitianOperator coupling_;
    double commutator_norm_ = 0.0;
    bool commuting_ = false;
    bool diagonal_ = false;
};

inline SystemModel build_system(const RealVector& energies, const CouplingSpec& coupling) {
    if (energies.size() < 1) throw ContractViolation("build_system: energies must be non-empty");
    const auto d = energies.size();
    HermitianOperator f = std::visit(
        [d](const auto& c) -> HermitianOperator {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, ProjectorCoupling>) {
                if (c.level < 0 || c.level >= d)
                    throw ContractViolation("build_system: projector index " +
                                            std::to_string(c.level) + " out of range");
                return HermitianOperator::projector(d, c.level);
            } else {
                return c;
            }
        },
        coupling);
    return SystemModel(HermitianOperator::diagonal(energies), std::move(f));
}

// A basis diagonalizing both H_Q and f of a commuting system; columns are the
// common eigenvectors. Uses a generic linear combination to split degeneracies.
struct CommonEigenbasis {
    ComplexMatrix vectors;
    RealVector energies;
    RealVector coupling_values;
};

inline CommonEigenbasis common_eigenbasis(const SystemModel& sys) {
    if (!sys.commuting()) throw ContractViolation("common_eigenbasis: [H_Q, f] != 0");
    if (sys.diagonal()) {
        return {ComplexMatrix::Identity(sys.dim(), sys.dim()), sys.energies(),
                sys.coupling().real_diagonal()};
    }
    const double mix = 0.7548776662466927; // plastic-number reciprocal: avoids accidental ties
    const Spectrum sp = spectrum(sys.hamiltonian() + mix * sys.coupling());
    CommonEigenbasis out;
    out.vectors = sp.vectors;
    out.energies = (sp.vectors.adjoint() * sys.hamiltonian().matrix() * sp.vectors)
                       .diagonal()
                       .real();
    out.coupling_values =
        (sp.vectors.adjoint() * sys.coupling().matrix() * sp.vectors).diagonal().real();
    return out;
}

} // namespace meanforce
