// estimator.hpp: Monte Carlo accumulation of the reduced density, Hamiltonian
// of mean force extraction, operator-basis fitting and level-shift
// diagnostics, plus the analytic commuting-sector reference state.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meanforce/errors.hpp"
#include "meanforce/quench.hpp"
#include "meanforce/system_model.hpp"

namespace meanforce {

// Half-open range [first, last) of random-stream ids.
struct StreamRange {
    std::uint64_t first = 0;
    std::uint64_t last = 0;

    friend bool operator==(const StreamRange&, const StreamRange&) = default;
};

// Running mean and co-moment of the real parameter vector
// p = [Re U (column major), Im U (column major)].
//
// sum() and sum_sq() are derived views. Updates use the pairwise
// (Chan et al.) form, so identical samples give exactly zero spread and
// accumulate(e, U) == merge(e, singleton(U)) bit for bit.
class DensityEstimate {
public:
    explicit DensityEstimate(Eigen::Index dim)
        : dim_(dim), mean_(Eigen::VectorXd::Zero(2 * dim * dim)),
          comoment_(RealMatrix::Zero(2 * dim * dim, 2 * dim * dim)) {
        if (dim < 1) throw ContractViolation("DensityEstimate: dimension must be >= 1");
    }

    Eigen::Index dim() const { return dim_; }
    std::int64_t count() const { return count_; }
    const std::vector<StreamRange>& seed_manifest() const { return manifest_; }

    const Eigen::VectorXd& parameter_mean() const { return mean_; }

    // Symmetric co-moment sum_s (p_s - mean)(p_s - mean)^T.
    RealMatrix comoment() const {
        RealMatrix full = comoment_.selfadjointView<Eigen::Lower>();
        return full;
    }

    ComplexMatrix mean() const { return unpack(mean_, dim_); }
    ComplexMatrix sum() const { return static_cast<double>(count_) * mean(); }

    // Elementwise sum of |U_ij|^2.
    RealMatrix sum_sq() const {
        const ComplexMatrix m = mean();
        RealMatrix out = static_cast<double>(count_) * m.cwiseAbs2();
        const auto n2 = dim_ * dim_;
        for (Eigen::Index k = 0; k < n2; ++k)
            out(k % dim_, k / dim_) += comoment_(k, k) + comoment_(n2 + k, n2 + k);
        return out;
    }

    // Standard error of the mean, elementwise (|.| of complex entries).
    RealMatrix elementwise_stderr() const {
        if (count_ < 2) throw ContractViolation("stderr needs at least two samples");
        const double n = static_cast<double>(count_);
        const auto n2 = dim_ * dim_;
        RealMatrix out(dim_, dim_);
        for (Eigen::Index k = 0; k < n2; ++k) {
            const double var = (comoment_(k, k) + comoment_(n2 + k, n2 + k)) / (n - 1.0);
            out(k % dim_, k / dim_) = std::sqrt(std::max(var, 0.0) / n);
        }
        return out;
    }

    // Covariance of the parameter mean: comoment / (n (n - 1)).
    RealMatrix mean_covariance() const {
        if (count_ < 2) throw ContractViolation("covariance needs at least two samples");
        const double n = static_cast<double>(count_);
        return comoment() / (n * (n - 1.0));
    }

    void record_streams(StreamRange r) {
        if (!manifest_.empty() && manifest_.back().last == r.first)
            manifest_.back().last = r.last;
        else
            manifest_.push_back(r);
    }

    void add(const ComplexMatrix& u) {
        if (u.rows() != dim_ || u.cols() != dim_)
            throw DimensionMismatch("accumulate: sample dimension does not match estimate");
        const Eigen::VectorXd p = pack(u);
        const double na = static_cast<double>(count_);
        const double n = na + 1.0;
        const Eigen::VectorXd delta = p - mean_;
        mean_ += delta * (1.0 / n);
        comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na / n);
        ++count_;
    }

    friend DensityEstimate merge(const DensityEstimate& a, const DensityEstimate& b) {
        if (a.dim_ != b.dim_) throw DimensionMismatch("merge: estimate dimensions differ");
        DensityEstimate out(a.dim_);
        const double na = static_cast<double>(a.count_);
        const double nb = static_cast<double>(b.count_);
        out.count_ = a.count_ + b.count_;
        out.manifest_ = a.manifest_;
        for (const auto& r : b.manifest_) out.record_streams(r);
        if (out.count_ == 0) return out;
        const double n = na + nb;
        const Eigen::VectorXd delta = b.mean_ - a.mean_;
        out.mean_ = a.mean_ + delta * (nb / n);
        out.comoment_ = a.comoment_ + b.comoment_;
        out.comoment_.selfadjointView<Eigen::Lower>().rankUpdate(delta, na * nb / n);
        return out;
    }

    static Eigen::VectorXd pack(const ComplexMatrix& u) {
        const auto n2 = u.size();
        Eigen::VectorXd p(2 * n2);
        for (Eigen::Index k = 0; k < n2; ++k) {
            p(k) = u(k % u.rows(), k / u.rows()).real();
            p(n2 + k) = u(k % u.rows(), k / u.rows()).imag();
        }
        return p;
    }

    static ComplexMatrix unpack(const Eigen::VectorXd& p, Eigen::Index dim) {
        const auto n2 = dim * dim;
        ComplexMatrix u(dim, dim);
        for (Eigen::Index k = 0; k < n2; ++k) u(k % dim, k / dim) = Complex(p(k), p(n2 + k));
        return u;
    }

private:
    Eigen::Index dim_;
    std::int64_t count_ = 0;
    Eigen::VectorXd mean_;
    RealMatrix comoment_; // lower triangle only
    std::vector<StreamRange> manifest_;
};

inline DensityEstimate accumulate(DensityEstimate est, const QuenchedSample& sample) {
    est.add(sample.propagator);
    return est;
}

// ---------------------------------------------------------------------------

struct DensityMean {
    HermitianOperator rho;     // hermitized sample mean, unit trace
    RealMatrix std_error;         // elementwise, on the normalized scale
    ComplexMatrix raw_mean;    // unnormalized sample mean
    RealMatrix raw_stderr;     // elementwise, unnormalized scale
    double trace = 0.0;        // Tr of the hermitized raw mean
};

inline HermitianOperator hermitized_normalized(const ComplexMatrix& raw) {
    const ComplexMatrix h = 0.5 * (raw + raw.adjoint());
    return normalized(HermitianOperator::from_matrix(h));
}

inline DensityMean mean_density(const DensityEstimate& est) {
    if (est.count() < 2)
        throw ContractViolation("mean_density: need at least two samples, have " +
                                std::to_string(est.count()));
    DensityMean out;
    out.raw_mean = est.mean();
    out.raw_stderr = est.elementwise_stderr();
    out.rho = hermitized_normalized(out.raw_mean);
    out.trace = out.raw_mean.trace().real();
    out.std_error = out.raw_stderr / out.trace;
    return out;
}

// First-order propagation of the sample covariance of the mean through a
// functional q(raw mean) -> vector. Central differences with a step of one
// standard error per parameter. A floor of 64 ulp of each value covers
// roundoff for quantities with no statistical spread.
struct Propagated {
    Eigen::VectorXd value;
    Eigen::VectorXd std_error;
};

template <class F>
Propagated propagate(const DensityEstimate& est, F&& q) {
    const Eigen::VectorXd p0 = est.parameter_mean();
    const Eigen::Index dim = est.dim();
    Propagated out;
    out.value = q(DensityEstimate::unpack(p0, dim));
    const RealMatrix cov = est.mean_covariance();
    const Eigen::Index m = out.value.size();

    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < p0.size(); ++i)
        if (cov(i, i) > 0.0) active.push_back(i);

    RealMatrix g(m, static_cast<Eigen::Index>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
        const Eigen::Index i = active[a];
        const double h = std::sqrt(cov(i, i));
        Eigen::VectorXd plus = p0, minus = p0;
        plus(i) += h;
        minus(i) -= h;
        g.col(static_cast<Eigen::Index>(a)) =
            0.5 * (q(DensityEstimate::unpack(plus, dim)) - q(DensityEstimate::unpack(minus, dim)));
    }
    RealMatrix corr(active.size(), active.size());
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = 0; b < active.size(); ++b)
            corr(a, b) = cov(active[a], active[b]) /
                         std::sqrt(cov(active[a], active[a]) * cov(active[b], active[b]));
    const Eigen::VectorXd var = (g * corr * g.transpose()).diagonal();
    constexpr double floor_ulps = 64.0 * std::numeric_limits<double>::epsilon();
    out.std_error.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double fl = floor_ulps * (1.0 + std::abs(out.value(k)));
        out.std_error(k) = std::sqrt(std::max(var(k), 0.0) + fl * fl);
    }
    return out;
}

// ---------------------------------------------------------------------------

// Normalized e^{-beta H_Q} e^{beta lambda f^2}; commuting systems only.
inline HermitianOperator analytic_reduced(const SystemModel& sys, double lambda, double beta) {
    if (!sys.commuting()) throw ContractViolation("analytic_reduced: [H_Q, f] != 0");
    if (!(beta > 0.0)) throw ContractViolation("analytic_reduced: beta must be > 0");
    const ScaledExponential bare = herm_expm_scaled(sys.hamiltonian(), -beta);
    const ScaledExponential shift = herm_expm_scaled(sys.coupling_squared(), beta * lambda);
    return normalized(enforce_hermitian(bare.scaled.matrix() * shift.scaled.matrix()));
}

struct Gauge {
    enum class Kind { anchor_level0, traceless };
    Kind kind = Kind::anchor_level0;
    double anchor_energy = 0.0;

    // Shift so that entry (0,0) equals E_0; valid when f|0> = 0.
    static Gauge anchor_level0(double e0) { return {Kind::anchor_level0, e0}; }
    static Gauge anchor_level0(const SystemModel& sys) {
        return anchor_level0(sys.hamiltonian()(0, 0).real());
    }
    static Gauge traceless() { return {Kind::traceless, 0.0}; }
};

// -(1/beta) log rho, with the additive scalar fixed by the gauge.
inline HermitianOperator extract_hmf(const HermitianOperator& rho, double beta, const Gauge& gauge) {
    if (!(beta > 0.0)) throw ContractViolation("extract_hmf: beta must be > 0");
    const HermitianOperator h = (-1.0 / beta) * herm_logm(rho);
    switch (gauge.kind) {
    case Gauge::Kind::anchor_level0:
        return h.shifted(gauge.anchor_energy - h(0, 0).real());
    case Gauge::Kind::traceless:
        return h.shifted(-trace_real(h) / static_cast<double>(h.dim()));
    }
    return h;
}

// H ~ c0 I + a_H H_S + a_P f^2 (for a projector coupling f^2 = P).
struct HmfFit {
    double c0 = 0.0;
    double a_H = 0.0;
    double a_P = 0.0;
    double residual = 0.0;     // HS norm of H minus the fitted combination
    double offdiag_norm = 0.0; // HS norm of H's off-diagonal part in the H_Q eigenbasis
};

namespace detail {

inline ComplexMatrix in_system_basis(const ComplexMatrix& m, const SystemModel& sys) {
    if (sys.hamiltonian().is_diagonal()) return m;
    const Spectrum sp = spectrum(sys.hamiltonian());
    return sp.vectors.adjoint() * m * sp.vectors;
}

} // namespace detail

inline HmfFit fit_basis(const HermitianOperator& h, const SystemModel& sys) {
    HermitianOperator::check_same_dim(h, sys.hamiltonian());
    const HermitianOperator basis[3] = {HermitianOperator::identity(h.dim()), sys.hamiltonian(),
                                        sys.coupling_squared()};
    Eigen::Matrix3d gram;
    Eigen::Vector3d rhs;
    for (int a = 0; a < 3; ++a) {
        rhs(a) = hs_inner(basis[a], h).real();
        for (int b = 0; b < 3; ++b) gram(a, b) = hs_inner(basis[a], basis[b]).real();
    }
    const Eigen::Vector3d scale = gram.diagonal().cwiseSqrt();
    if ((scale.array() == 0.0).any()) throw SingularBasisError("fit_basis: a basis operator is zero");
    const Eigen::Matrix3d unit = scale.cwiseInverse().asDiagonal() * gram *
                                 scale.cwiseInverse().asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(unit);
    if (es.eigenvalues().minCoeff() < 1e-10)
        throw SingularBasisError("fit_basis: {I, H_S, f^2} are linearly dependent");
    const Eigen::Vector3d coef = gram.ldlt().solve(rhs);

    HmfFit fit;
    fit.c0 = coef(0);
    fit.a_H = coef(1);
    fit.a_P = coef(2);
    const ComplexMatrix remainder = h.matrix() - coef(0) * basis[0].matrix() -
                                    coef(1) * basis[1].matrix() - coef(2) * basis[2].matrix();
    fit.residual = hs_norm(remainder);
    ComplexMatrix off = detail::in_system_basis(h.matrix(), sys);
    off.diagonal().setZero();
    fit.offdiag_norm = hs_norm(off);
    return fit;
}

// Delta_i = (H_MF - H_Q)_ii in the H_Q eigenbasis.
inline RealVector level_shifts(const HermitianOperator& hmf, const SystemModel& sys) {
    HermitianOperator::check_same_dim(hmf, sys.hamiltonian());
    return detail::in_system_basis((hmf - sys.hamiltonian()).matrix(), sys).diagonal().real();
}

inline RealVector populations(const HermitianOperator& rho, const SystemModel& sys) {
    return detail::in_system_basis(rho.matrix(), sys).diagonal().real();
}

// lambda_est = (1/beta) mean_{j != c} [ln(p_c/p_j) - ln(p_c^bare/p_j^bare)].
// Exact on the analytic state for a projector coupling onto level c.
inline double lambda_estimate(const HermitianOperator& rho, const SystemModel& sys, double beta,
                              Eigen::Index coupled_level) {
    const RealVector p = populations(rho, sys);
    const RealVector bare = populations(gibbs_state(sys.hamiltonian(), beta), sys);
    if (coupled_level < 0 || coupled_level >= p.size())
        throw ContractViolation("lambda_estimate: coupled level out of range");
    if (p.size() < 2) throw ContractViolation("lambda_estimate: need at least two levels");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (j == coupled_level) continue;
        acc += std::log(p(coupled_level) / p(j)) - std::log(bare(coupled_level) / bare(j));
    }
    return acc / (beta * static_cast<double>(p.size() - 1));
}

// ---------------------------------------------------------------------------

struct WeightDiagnostics {
    double top_percent_share = 0.0; // fraction of total weight in the top 1% of samples
    double kish_ess = 0.0;          // (sum w)^2 / sum w^2
    bool heavy_tailed = false;      // top 1% carries more than half the weight
};

inline WeightDiagnostics weight_diagnostics(std::vector<double> weights) {
    WeightDiagnostics d;
    if (weights.empty()) return d;
    double total = 0.0, total_sq = 0.0;
    for (double w : weights) {
        total += w;
        total_sq += w * w;
    }
    const std::size_t top = std::max<std::size_t>(1, weights.size() / 100);
    std::nth_element(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(top - 1),
                     weights.end(), std::greater<>());
    double top_sum = 0.0;
    for (std::size_t i = 0; i < top; ++i) top_sum += weights[i];
    d.top_percent_share = total > 0.0 ? top_sum / total : 0.0;
    d.kish_ess = total_sq > 0.0 ? total * total / total_sq : 0.0;
    d.heavy_tailed = d.top_percent_share > 0.5;
    return d;
}

} // namespace meanforce
