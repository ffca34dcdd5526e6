// noise.hpp: Sampling the stationary Gaussian field xi(tau) with covariance
// K(tau - tau') on the midpoint grid.
//
// Every noise draw owns an independent random stream derived from
// (seed, stream id), so results do not depend on how draws are distributed
// across workers.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "meanforce/errors.hpp"
#include "meanforce/kernel.hpp"

namespace meanforce {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

// One reproducible stream of standard normals.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream),
          engine_(detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

    double normal() { return normal_(engine_); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// L with L L^T = Sigma. Cholesky when Sigma is numerically positive definite,
// otherwise V sqrt(max(D, 0)) from the symmetric eigen-decomposition.
class NoiseFactor {
public:
    static constexpr double kClipBudget = 1e-8;

    NoiseFactor(TimeGrid grid, RealMatrix factor, double clipped_mass, bool triangular)
        : grid_(grid), factor_(std::move(factor)), clipped_mass_(clipped_mass),
          triangular_(triangular) {
        // X = Delta sum_j (L w)_j = (Delta L^T 1) . w
        integrated_weights_ = grid_.spacing() * factor_.transpose() *
                              Eigen::VectorXd::Ones(factor_.rows());
    }

    const TimeGrid& grid() const { return grid_; }
    const RealMatrix& factor() const { return factor_; }
    double clipped_mass() const { return clipped_mass_; }
    bool is_cholesky() const { return triangular_; }
    const Eigen::VectorXd& integrated_weights() const { return integrated_weights_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& white) const {
        if (triangular_) return factor_.triangularView<Eigen::Lower>() * white;
        return factor_ * white;
    }

private:
    TimeGrid grid_;
    RealMatrix factor_;
    double clipped_mass_;
    bool triangular_;
    Eigen::VectorXd integrated_weights_;
};

inline NoiseFactor factorize(const KernelMatrix& k) {
    const RealMatrix& sigma = k.covariance;
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() != 0.0)
        throw ContractViolation("factorize: covariance is not symmetric");
    const Eigen::LLT<RealMatrix> llt(sigma);
    if (llt.info() == Eigen::Success) {
        RealMatrix l = llt.matrixL();
        if (l.allFinite()) return NoiseFactor(k.grid, std::move(l), 0.0, true);
    }
    const Eigen::SelfAdjointEigenSolver<RealMatrix> es(sigma);
    if (es.info() != Eigen::Success)
        throw NumericalError("factorize: eigen-decomposition of covariance failed");
    Eigen::VectorXd values = es.eigenvalues();
    double clipped = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) < 0.0) {
            clipped += -values(i);
            values(i) = 0.0;
        }
    }
    const double trace = sigma.trace();
    if (clipped > NoiseFactor::kClipBudget * std::abs(trace))
        throw IndefiniteCovarianceError("factorize: clipped negative eigenvalue mass " +
                                            std::to_string(clipped) + " exceeds budget",
                                        clipped);
    RealMatrix l = es.eigenvectors() * values.cwiseSqrt().asDiagonal();
    return NoiseFactor(k.grid, std::move(l), clipped, false);
}

// One realization xi(tau_j) at the grid midpoints.
struct NoisePath {
    TimeGrid grid;
    Eigen::VectorXd values;
};

inline Eigen::VectorXd draw_white(RandomStream& rng, Eigen::Index n) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.normal();
    return w;
}

inline NoisePath sample_path(const NoiseFactor& factor, RandomStream& rng) {
    const Eigen::VectorXd w = draw_white(rng, factor.grid().slices());
    return {factor.grid(), factor.apply(w)};
}

// X alone, from the same white-noise draw sample_path would consume. Used by
// the commuting fast path, where X is all the propagator depends on.
inline double sample_integrated_field(const NoiseFactor& factor, RandomStream& rng) {
    const Eigen::VectorXd w = draw_white(rng, factor.grid().slices());
    return factor.integrated_weights().dot(w);
}

// X = int_0^beta xi(tau) d tau by the midpoint rule.
inline double integrated_field(const NoisePath& path) {
    return path.grid.spacing() * path.values.sum();
}

inline NoisePath antithetic_pair(const NoisePath& path) { return {path.grid, -path.values}; }

// xi(beta - tau): the time-reversed realization.
inline NoisePath reversed(const NoisePath& path) {
    return {path.grid, path.values.reverse()};
}

} // namespace meanforce
