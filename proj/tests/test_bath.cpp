#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "meanforce/bath.hpp"

using namespace meanforce;

TEST(SpectralDensity, ZeroCoupling) {
    const auto j = SpectralDensity::ohmic_exponential(0.0, 1.0);
    EXPECT_EQ(eval_spectral(j, 0.0), 0.0);
    EXPECT_EQ(eval_spectral(j, 3.0), 0.0);
}

TEST(SpectralDensity, PointValue) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    EXPECT_NEAR(eval_spectral(j, 1.0), 0.7357588823428847, 1e-15);
    EXPECT_EQ(eval_spectral(j, 0.0), 0.0);
}

TEST(SpectralDensity, OhmicLowFrequencyLaw) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    for (double w : {1e-6, 1e-8, 1e-10}) EXPECT_NEAR(eval_spectral(j, w) / w, 2.0, 1e-5);
}

TEST(SpectralDensity, RejectsNegativeFrequencyAndBadParameters) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    EXPECT_THROW(eval_spectral(j, -0.1), ContractViolation);
    EXPECT_THROW(SpectralDensity::ohmic_exponential(-1.0, 1.0), ContractViolation);
    EXPECT_THROW(SpectralDensity::ohmic_exponential(1.0, 0.0), ContractViolation);
}

TEST(LambdaContinuum, MatchesAnalyticValue) {
    // (1/pi) int_0^inf 2 g^2 e^{-w/wc} dw = 2 g^2 wc / pi
    EXPECT_EQ(lambda_continuum(SpectralDensity::ohmic_exponential(0.0, 1.0)), 0.0);
    EXPECT_NEAR(lambda_continuum(SpectralDensity::ohmic_exponential(1.0, 1.0)),
                0.6366197723675814, 0.6366197723675814 * 1e-10);
    EXPECT_NEAR(lambda_continuum(SpectralDensity::ohmic_exponential(0.5, 1.0)),
                0.15915494309189535, 0.15915494309189535 * 1e-10);
    const double wc = 2.5;
    const double expected = 2.0 * 0.7 * 0.7 * wc / std::numbers::pi;
    EXPECT_NEAR(lambda_continuum(SpectralDensity::ohmic_exponential(0.7, wc)), expected,
                expected * 1e-10);
}

TEST(LambdaContinuum, ScalesExactlyAsGSquared) {
    const double unit = lambda_continuum(SpectralDensity::ohmic_exponential(1.0, 1.0));
    for (double g : {0.25, 0.5, 1.5, 2.0, 3.7})
        EXPECT_EQ(lambda_continuum(SpectralDensity::ohmic_exponential(g, 1.0)), g * g * unit);
}

TEST(Discretize, SingleMode) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    const auto bath = discretize(j, 1, 2.0);
    ASSERT_EQ(bath.size(), 1u);
    EXPECT_DOUBLE_EQ(bath.modes()[0].frequency, 1.0);
    EXPECT_DOUBLE_EQ(bath.modes()[0].bin_width, 2.0);
    const double expected_c2 = (2.0 / std::numbers::pi) * (2.0 * std::exp(-1.0)) * 1.0 * 2.0;
    EXPECT_NEAR(bath.modes()[0].coupling_sq, expected_c2, 1e-15);
}

TEST(Discretize, ZeroCouplingBath) {
    const auto bath = discretize(SpectralDensity::ohmic_exponential(0.0, 1.0), 50, 8.0);
    for (const auto& m : bath.modes()) EXPECT_EQ(m.coupling_sq, 0.0);
    EXPECT_EQ(bath.lambda(), 0.0);
    EXPECT_EQ(lambda_disc(bath), 0.0);
}

TEST(Discretize, TracksContinuumAtDefaultResolution) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    const auto bath = discretize(j, 200, 8.0);
    const double cont = lambda_continuum(j);
    EXPECT_LT(std::abs(bath.lambda() - cont) / cont, 0.01);
}

TEST(Discretize, CutoffIntervalKeepsOnlyLowFrequencyShare) {
    // On (0, wc] the retained fraction is int_0^1 e^{-w} dw = 1 - 1/e.
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    const auto bath = discretize(j, 400, 1.0);
    EXPECT_NEAR(bath.lambda() / lambda_continuum(j), 1.0 - std::exp(-1.0), 1e-5);
}

TEST(Discretize, MidpointsStrictlyIncreasingInsideInterval) {
    const auto bath = discretize(SpectralDensity::ohmic_exponential(1.0, 1.0), 7, 3.5);
    for (std::size_t k = 0; k < bath.size(); ++k) {
        EXPECT_NEAR(bath.modes()[k].frequency, (k + 0.5) * 0.5, 1e-15);
        EXPECT_GT(bath.modes()[k].frequency, 0.0);
        EXPECT_LE(bath.modes()[k].frequency, 3.5);
    }
}

TEST(Discretize, MonotoneInBandwidthAtFixedBinWidth) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    const double width = 0.04;
    double previous = 0.0;
    for (int k = 10; k <= 400; k += 10) {
        const double lam = discretize(j, k, k * width).lambda();
        EXPECT_GE(lam, previous);
        previous = lam;
    }
    EXPECT_LT(std::abs(previous - lambda_continuum(j)) / lambda_continuum(j), 1e-3);
}

TEST(Discretize, Preconditions) {
    const auto j = SpectralDensity::ohmic_exponential(1.0, 1.0);
    EXPECT_THROW(discretize(j, 0, 1.0), ContractViolation);
    EXPECT_THROW(discretize(j, 4, 0.0), ContractViolation);
}

TEST(LambdaDisc, Arithmetic) {
    EXPECT_DOUBLE_EQ(lambda_disc(DiscretizedBath({{1.0, 2.0, 0.1}})), 1.0);
    EXPECT_EQ(lambda_disc(DiscretizedBath({{1.0, 0.0, 0.1}, {2.0, 0.0, 0.1}})), 0.0);
    const auto bath = discretize(SpectralDensity::ohmic_exponential(1.3, 1.0), 200, 8.0);
    EXPECT_EQ(lambda_disc(bath), bath.lambda());
}

TEST(DiscretizedBath, RejectsInvalidModes) {
    EXPECT_THROW(DiscretizedBath({{1.0, 1.0, 0.1}, {1.0, 1.0, 0.1}}), ContractViolation);
    EXPECT_THROW(DiscretizedBath({{0.0, 1.0, 0.1}}), ContractViolation);
    EXPECT_THROW(DiscretizedBath({{1.0, -1.0, 0.1}}), ContractViolation);
}
