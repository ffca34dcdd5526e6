#include <gtest/gtest.h>

#include <cmath>

#include "meanforce/kernel.hpp"

using namespace meanforce;

namespace {

DiscretizedBath ohmic_bath(double g, int modes = 200, double omega_max = 8.0) {
    return discretize(SpectralDensity::ohmic_exponential(g, 1.0), modes, omega_max);
}

DiscretizedBath single_mode(double omega, double c2) { return DiscretizedBath({{omega, c2, 0.1}}); }

} // namespace

TEST(TimeGrid, MidpointsAndSpacing) {
    const TimeGrid grid(2.0, 8);
    EXPECT_DOUBLE_EQ(grid.spacing(), 0.25);
    EXPECT_DOUBLE_EQ(grid.midpoint(0), 0.125);
    EXPECT_DOUBLE_EQ(grid.midpoint(7), 1.875);
    double total = 0.0;
    for (int j = 0; j < grid.slices(); ++j) total += grid.spacing();
    EXPECT_NEAR(total, grid.beta(), 1e-13 * grid.beta());
    EXPECT_THROW(TimeGrid(0.0, 4), ContractViolation);
    EXPECT_THROW(TimeGrid(1.0, 0), ContractViolation);
}

TEST(KernelDiscrete, ZeroCoupling) {
    const auto bath = ohmic_bath(0.0);
    for (double tau : {0.0, 0.3, 1.0, 2.0}) EXPECT_EQ(kernel_discrete(bath, tau, 2.0), 0.0);
}

TEST(KernelDiscrete, SingleModeValue) {
    // 0.5 cosh(1) / sinh(1)
    EXPECT_NEAR(kernel_discrete(single_mode(1.0, 1.0), 0.0, 2.0), 0.6565176427496657, 1e-15);
}

TEST(KernelDiscrete, SymmetricAboutHalfBetaAndEven) {
    const auto bath = ohmic_bath(1.0);
    const double beta = 3.0;
    for (double tau : {0.0, 0.1, 0.77, 1.5, 2.2, 3.0}) {
        EXPECT_NEAR(kernel_discrete(bath, tau, beta), kernel_discrete(bath, beta - tau, beta),
                    1e-14 * kernel_discrete(bath, tau, beta));
        EXPECT_EQ(kernel_discrete(bath, tau, beta), kernel_discrete(bath, -tau, beta));
    }
}

TEST(KernelDiscrete, LargeBetaOmegaDoesNotOverflow) {
    const double k = kernel_discrete(single_mode(50.0, 1.0), 0.0, 100.0);
    EXPECT_TRUE(std::isfinite(k));
    EXPECT_NEAR(k, 1.0 / 100.0, 1e-15);
}

TEST(KernelDiscrete, RejectsTauBeyondBeta) {
    EXPECT_THROW(kernel_discrete(ohmic_bath(1.0), 2.5, 2.0), ContractViolation);
}

TEST(KernelContinuum, ZeroCouplingAndEvenness) {
    const auto zero = SpectralDensity::ohmic_exponential(0.0, 1.0);
    EXPECT_EQ(kernel_continuum(zero, 0.5, 2.0), 0.0);
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    EXPECT_EQ(kernel_continuum(j, 0.4, 2.0), kernel_continuum(j, -0.4, 2.0));
}

TEST(KernelContinuum, MatchesHighPrecisionQuadrature) {
    // mpmath, 25 digits: (1/pi) int 2 w e^{-w} cosh(w(1 - 0.5))/sinh(w) dw
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    EXPECT_NEAR(kernel_continuum(j, 0.5, 2.0), 0.5951135641194678, 0.5951135641194678 * 1e-8);
}

TEST(KernelContinuum, AgreesWithFineModeSum) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    const double beta = 2.0, tau = beta / 4.0;
    const double cont = kernel_continuum(j, tau, beta);
    const double disc = kernel_discrete(discretize(j, 400, 8.0), tau, beta);
    EXPECT_LT(std::abs(disc - cont) / cont, 1e-3);
}

TEST(CovarianceMatrix, ZeroCouplingGivesZeroMatrix) {
    const auto k = covariance_matrix(ohmic_bath(0.0), TimeGrid(2.0, 16));
    EXPECT_EQ(k.covariance.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CovarianceMatrix, SingleSlice) {
    const auto bath = ohmic_bath(1.0);
    const auto k = covariance_matrix(bath, TimeGrid(2.0, 1));
    ASSERT_EQ(k.covariance.rows(), 1);
    EXPECT_EQ(k.covariance(0, 0), kernel_discrete(bath, 0.0, 2.0));
}

TEST(CovarianceMatrix, SymmetricToeplitzAndPsd) {
    const auto k = covariance_matrix(ohmic_bath(1.0), TimeGrid(2.0, 64));
    const auto& s = k.covariance;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            EXPECT_EQ(s(i, j), s(j, i));
            if (i > 0 && j > 0) EXPECT_EQ(s(i, j), s(i - 1, j - 1));
        }
    const Eigen::SelfAdjointEigenSolver<RealMatrix> es(s, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
}

TEST(CovarianceMatrix, DoubleSumConvergesToCBetaAtSecondOrder) {
    const auto bath = ohmic_bath(1.0);
    for (double beta : {2.0, 4.0}) {
        const auto error_at = [&](int n) {
            const auto k = covariance_matrix(bath, TimeGrid(beta, n));
            const double delta = beta / n;
            return delta * delta * k.covariance.sum() - c_beta(bath, beta);
        };
        const double e64 = error_at(64), e128 = error_at(128);
        EXPECT_NEAR(e64 / e128, 4.0, 0.05);
        EXPECT_LT(std::abs(e128) / c_beta(bath, beta), 1e-3);
    }
}

TEST(CBeta, ClosedForm) {
    EXPECT_EQ(c_beta(ohmic_bath(0.0), 2.0), 0.0);
    EXPECT_DOUBLE_EQ(c_beta(single_mode(1.0, 2.0), 3.0), 6.0);
    EXPECT_THROW(c_beta(single_mode(1.0, 2.0), 0.0), ContractViolation);
}

TEST(CBeta, DoubleQuadratureAgrees) {
    EXPECT_NEAR(c_beta_quadrature(single_mode(1.0, 2.0), 3.0), 6.0, 6.0 * 1e-9);
    const auto bath = ohmic_bath(1.0, 40, 8.0);
    const double closed = c_beta(bath, 2.0);
    EXPECT_NEAR(c_beta_quadrature(bath, 2.0), closed, closed * 1e-8);
}

TEST(CBeta, PerModeIdentity) {
    // int int cosh[w(b/2-|t-t'|)]/sinh(b w/2) = 2 b / w; with c^2 = 2w the
    // mode prefactor c^2/(2w) is one.
    for (double w : {0.3, 1.0, 2.7, 6.0})
        for (double beta : {0.5, 2.0, 5.0})
            EXPECT_NEAR(c_beta_quadrature(single_mode(w, 2.0 * w), beta), 2.0 * beta / w,
                        1e-8 * 2.0 * beta / w);
}

TEST(CBeta, TemperatureIndependentRatio) {
    const auto bath = ohmic_bath(1.3);
    const double ref = c_beta(bath, 1.0) / 2.0;
    for (double beta : {0.25, 0.5, 2.0, 4.0, 9.0})
        EXPECT_NEAR(c_beta(bath, beta) / (2.0 * beta), ref, 1e-15 * ref);
}
