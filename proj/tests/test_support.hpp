// test_support.hpp: Shared generators for the unit tests.

#pragma once

#include <random>

#include <Eigen/Dense>

#include "meanforce/system_model.hpp"

namespace meanforce::testing {

// Haar-like random unitary from the QR decomposition of a complex Gaussian matrix.
inline ComplexMatrix random_unitary(Eigen::Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    ComplexMatrix z(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) z(i, j) = Complex(n(rng), n(rng));
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    return qr.householderQ() * ComplexMatrix::Identity(d, d);
}

// Random Hermitian operator with spectrum uniform in [-bound, bound].
inline HermitianOperator random_hermitian(Eigen::Index d, std::mt19937_64& rng, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    RealVector values(d);
    for (Eigen::Index i = 0; i < d; ++i) values(i) = u(rng);
    const ComplexMatrix v = random_unitary(d, rng);
    const ComplexMatrix m = v * values.cast<Complex>().asDiagonal() * v.adjoint();
    return HermitianOperator::from_matrix(0.5 * (m + m.adjoint()));
}

inline RealVector default_energies() {
    RealVector e(5);
    e << 0.0, 0.35, 0.90, 1.70, 2.30;
    return e;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace meanforce::testing
