#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "meanforce/edref.hpp"
#include "meanforce/estimator.hpp"
#include "test_support.hpp"

using namespace meanforce;
using meanforce::testing::default_energies;
using meanforce::testing::max_abs_diff;
using meanforce::testing::random_hermitian;

namespace {

SystemModel five_level() { return build_system(default_energies(), ProjectorCoupling{4}); }

DiscretizedBath ohmic_bath(double g) {
    return discretize(SpectralDensity::ohmic_exponential(g, 1.0), 200, 8.0);
}

FockConfig config(int n_max, int modes) {
    FockConfig cfg;
    cfg.n_max = n_max;
    cfg.modes_used = modes;
    return cfg;
}

// Brute-force reference: sum over the traced indices with explicit digits.
ComplexMatrix brute_partial_trace(const ComplexMatrix& m, int a, int b, int c, int keep) {
    const int dims[3] = {a, b, c};
    ComplexMatrix out = ComplexMatrix::Zero(dims[keep], dims[keep]);
    for (int i0 = 0; i0 < a; ++i0)
        for (int i1 = 0; i1 < b; ++i1)
            for (int i2 = 0; i2 < c; ++i2)
                for (int j0 = 0; j0 < a; ++j0)
                    for (int j1 = 0; j1 < b; ++j1)
                        for (int j2 = 0; j2 < c; ++j2) {
                            const int i[3] = {i0, i1, i2}, j[3] = {j0, j1, j2};
                            bool traced_equal = true;
                            for (int k = 0; k < 3; ++k)
                                if (k != keep && i[k] != j[k]) traced_equal = false;
                            if (!traced_equal) continue;
                            out(i[keep], j[keep]) += m((i0 * b + i1) * c + i2, (j0 * b + j1) * c + j2);
                        }
    return out;
}

} // namespace

TEST(DisplacedTrace, EqualsAnalyticReducedAtLambdaDisc) {
    const auto sys = five_level();
    for (double g : {0.25, 0.5, 1.0, 2.0}) {
        const auto bath = ohmic_bath(g);
        for (double beta : {0.25, 1.0, 2.0, 4.0})
            EXPECT_LT(max_abs_diff(displaced_trace_reduced(sys, bath, beta).matrix(),
                                   analytic_reduced(sys, lambda_disc(bath), beta).matrix()),
                      1e-14)
                << g << " " << beta;
    }
}

TEST(DisplacedTrace, ZeroCouplingIsBareGibbs) {
    const auto sys = five_level();
    EXPECT_LT(max_abs_diff(displaced_trace_reduced(sys, ohmic_bath(0.0), 2.0).matrix(),
                           gibbs_state(sys.hamiltonian(), 2.0).matrix()),
              1e-15);
}

TEST(DisplacedTrace, CoupledPopulationGrowsWithBeta) {
    const auto sys = five_level();
    const auto bath = ohmic_bath(1.0);
    double previous_ratio = 0.0;
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto rho = displaced_trace_reduced(sys, bath, beta);
        const auto bare = gibbs_state(sys.hamiltonian(), beta);
        const double ratio = rho(4, 4).real() / bare(4, 4).real();
        EXPECT_GT(ratio, previous_ratio);
        previous_ratio = ratio;
    }
}

TEST(DisplacedTrace, RejectsNonCommuting) {
    RealMatrix x = RealMatrix::Zero(5, 5);
    x(3, 4) = x(4, 3) = 1.0;
    const auto sys = build_system(default_energies(), HermitianOperator::from_real(x));
    EXPECT_THROW(displaced_trace_reduced(sys, ohmic_bath(1.0), 1.0), ContractViolation);
}

TEST(SelectEdModes, PreservesLambdaAndRespectsThermalGuard) {
    const auto bath = ohmic_bath(0.5);
    const double beta = 2.0;
    const auto picked = select_ed_modes(bath, config(8, 3), beta);
    ASSERT_EQ(picked.size(), 3u);
    EXPECT_NEAR(picked.lambda(), bath.lambda(), 1e-14 * bath.lambda());
    for (const auto& m : picked.modes()) EXPECT_GE(beta * m.frequency, 2.0);
    for (std::size_t k = 1; k < picked.size(); ++k)
        EXPECT_LT(picked.modes()[k - 1].frequency, picked.modes()[k].frequency);
    // a bath smaller than K_used is used unchanged
    const DiscretizedBath one({{1.0, 0.3, 0.1}});
    EXPECT_EQ(select_ed_modes(one, config(4, 3), beta).modes()[0].coupling_sq, 0.3);
}

TEST(FockEd, ZeroCouplingIsBareGibbsForAnyTruncation) {
    const auto sys = five_level();
    for (int n_max : {0, 1, 5}) {
        const auto r = fock_ed_reduced(sys, ohmic_bath(0.0), config(n_max, 2), 1.5);
        EXPECT_LT(max_abs_diff(r.state.matrix(), gibbs_state(sys.hamiltonian(), 1.5).matrix()),
                  1e-14)
            << n_max;
    }
}

TEST(FockEd, SingleWeakModeMatchesClosedForm) {
    const auto sys = five_level();
    const double beta = 2.0;
    const auto r = fock_ed_reduced(sys, ohmic_bath(0.2), config(12, 1), beta);
    ASSERT_EQ(r.modes.size(), 1u);
    const auto closed = displaced_trace_reduced(sys, r.modes, beta);
    EXPECT_LT(max_abs_diff(r.state.matrix(), closed.matrix()), 1e-8);
    EXPECT_TRUE(r.converged);
}

TEST(FockEd, ErrorAtLeastHalvesPerTwoExtraLevels) {
    const auto sys = five_level();
    const double beta = 2.0;
    const auto bath = ohmic_bath(0.5);
    double previous = std::numeric_limits<double>::infinity();
    for (int n_max : {2, 4, 6, 8, 10}) {
        const auto r = fock_ed_reduced(sys, bath, config(n_max, 2), beta);
        const double err =
            max_abs_diff(r.state.matrix(), displaced_trace_reduced(sys, r.modes, beta).matrix());
        EXPECT_LE(err, 0.5 * previous) << n_max;
        previous = err;
    }
    EXPECT_LT(previous, 1e-6);
}

TEST(FockEd, FullSpaceAgreesWithBlockPath) {
    // A commuting, non-diagonal system goes through the full product space;
    // rotating back must reproduce the block result of the diagonal system.
    RealVector e(3);
    e << 0.0, 0.4, 1.1;
    const auto diag_sys = build_system(e, ProjectorCoupling{2});
    std::mt19937_64 rng(5);
    const ComplexMatrix v = meanforce::testing::random_unitary(3, rng);
    const auto rotate = [&](const HermitianOperator& op) {
        return HermitianOperator::from_matrix(v * op.matrix() * v.adjoint());
    };
    const SystemModel rot_sys(rotate(diag_sys.hamiltonian()), rotate(diag_sys.coupling()));
    ASSERT_FALSE(rot_sys.diagonal());
    const auto bath = ohmic_bath(0.5);
    const auto cfg = config(5, 2);
    const auto block = fock_ed_reduced(diag_sys, bath, cfg, 1.5);
    const auto full = fock_ed_reduced(rot_sys, bath, cfg, 1.5);
    const ComplexMatrix back = v.adjoint() * full.state.matrix() * v;
    EXPECT_LT(max_abs_diff(back, block.state.matrix()), 1e-12);
}

TEST(FockEd, NonCommutingSystemGivesValidState) {
    RealMatrix f = RealMatrix::Zero(3, 3);
    f(2, 2) = 1.0;
    f(1, 2) = f(2, 1) = 0.5;
    RealVector e(3);
    e << 0.0, 0.5, 1.2;
    const auto sys = build_system(e, HermitianOperator::from_real(f));
    const auto r = fock_ed_reduced(sys, ohmic_bath(0.5), config(6, 2), 1.0);
    EXPECT_NEAR(trace_real(r.state), 1.0, 1e-13);
    EXPECT_GT(spectrum(r.state).values.minCoeff(), 0.0);
    EXPECT_GE(r.residual, 0.0);
}

TEST(FockEd, BudgetAndStrictConvergence) {
    const auto sys = five_level();
    EXPECT_THROW(fock_ed_reduced(sys, ohmic_bath(1.0), config(20, 4), 1.0), ContractViolation);
    auto cfg = config(1, 2);
    cfg.strict = true;
    try {
        fock_ed_reduced(sys, ohmic_bath(2.0), cfg, 2.0);
        FAIL() << "expected ConvergenceWarning";
    } catch (const ConvergenceWarning& w) {
        EXPECT_GT(w.residual, cfg.tolerance);
    }
    cfg.strict = false;
    const auto r = fock_ed_reduced(sys, ohmic_bath(2.0), cfg, 2.0);
    EXPECT_FALSE(r.converged);
}

TEST(PartialTrace, TrivialFactorIsIdentityMap) {
    std::mt19937_64 rng(1);
    const auto a = random_hermitian(4, rng, 1.0);
    EXPECT_EQ(max_abs_diff(partial_trace(a, {4, 1}, 0).matrix(), a.matrix()), 0.0);
    EXPECT_EQ(max_abs_diff(partial_trace(a, {1, 4}, 1).matrix(), a.matrix()), 0.0);
}

TEST(PartialTrace, ProductStateFactorizes) {
    std::mt19937_64 rng(2);
    const auto a = random_hermitian(3, rng, 1.0);
    const auto b = random_hermitian(4, rng, 1.0);
    const ComplexMatrix ab = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
    const auto op = HermitianOperator::from_matrix(ab);
    EXPECT_LT(max_abs_diff(partial_trace(op, {3, 4}, 0).matrix(), a.matrix() * b.matrix().trace()),
              1e-13);
    EXPECT_LT(max_abs_diff(partial_trace(op, {3, 4}, 1).matrix(), b.matrix() * a.matrix().trace()),
              1e-13);
}

TEST(PartialTrace, MatchesIndexSummationBruteForce) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto op = random_hermitian(20, rng, 2.0);
        for (int keep = 0; keep < 3; ++keep)
            EXPECT_LT(max_abs_diff(partial_trace(op, {5, 2, 2}, static_cast<std::size_t>(keep)).matrix(),
                                   brute_partial_trace(op.matrix(), 5, 2, 2, keep)),
                      1e-13);
    }
}

TEST(PartialTrace, PreservesTraceAndChecksDimensions) {
    std::mt19937_64 rng(4);
    const auto op = random_hermitian(24, rng, 3.0);
    for (std::size_t keep = 0; keep < 3; ++keep)
        EXPECT_NEAR(trace_real(partial_trace(op, {2, 3, 4}, keep)), trace_real(op), 1e-12);
    EXPECT_THROW(partial_trace(op, {5, 5}, 0), DimensionMismatch);
    EXPECT_THROW(partial_trace(op, {24}, 1), ContractViolation);
}
