#include "hadamard/quantize.hpp"

#include <gtest/gtest.h>

using namespace hadamard;

namespace {

RealVector cosine(const SpatialGrid& g, double a) {
    RealVector v(g.size());
    for (int j = 0; j < g.size(); ++j) v[j] = 1.0 + a * std::cos(g.node(j));
    return v;
}

}  // namespace

TEST(Quantize, OneIsIdentity) {
    const SpatialGrid g(32);
    const auto A = quantize(constant_symbol(g, 1.0));
    EXPECT_LT((A.entries - Matrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quantize, MultiplierIsDiagonal) {
    const SpatialGrid g(32);
    const RealVector v = cosine(g, 0.4);
    const auto A = quantize(function_symbol(g, v.cast<Complex>()));
    const Matrix expect = v.cast<Complex>().asDiagonal();
    EXPECT_LT((A.entries - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quantize, MomentumIsSpectralDerivative) {
    const SpatialGrid g(32);
    PolyhomSymbol k(g, 1.0, PolyhomSymbol::kExact);
    k.add(1.0, Vector::Ones(32), -Vector::Ones(32), true);
    const auto A = quantize(k);
    // D = i⁻¹∂ₓ; the two differ only on the Nyquist mode, which D drops
    const Matrix diff = to_fourier_basis(A.entries - derivative_matrix(g));
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            if (!g.is_nyquist(i) && !g.is_nyquist(j)) {
                EXPECT_LT(std::abs(diff(i, j)), 1e-12);
            }
}

TEST(Quantize, RealSymbolGivesHermitian) {
    const SpatialGrid g(32);
    const auto s = homogeneous_symbol(g, 1.0, cosine(g, 0.3).cast<Complex>(), cosine(g, -0.2).cast<Complex>());
    const auto A = quantize(s);
    EXPECT_LT((A.entries - A.entries.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NO_THROW((void)hermitize(A));
}

TEST(Quantize, HermitizeRejectsAsymmetric) {
    const SpatialGrid g(16);
    Matrix M = Matrix::Zero(16, 16);
    M(0, 1) = 1.0;
    EXPECT_THROW((void)hermitize(GridOperator(g, M)), QuantizationError);
}

TEST(WeylSymbol, FreeMassive) {
    const SpatialGrid g(32);
    const double m0 = 1.5;
    const auto s = weyl_symbol_of_diff_op(g, RealVector::Ones(32), Vector::Zero(32), RealVector::Constant(32, m0 * m0));
    EXPECT_NEAR(std::abs(s.eval(5, 3.0) - (9.0 + m0 * m0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(s.eval(5, -2.0) - (4.0 + m0 * m0)), 0.0, 1e-12);
}

TEST(WeylSymbol, MatchesDirectMatrix) {
    const SpatialGrid g(64);
    const RealVector a11 = cosine(g, 0.3);
    Vector b1(64);
    for (int j = 0; j < 64; ++j) b1[j] = Complex(0.2 * std::sin(g.node(j)), 0.1 * std::cos(2 * g.node(j)));
    const RealVector m = cosine(g, 0.5);
    const auto s = weyl_symbol_of_diff_op(g, a11, b1, m);
    const Matrix Q = quantize(s).entries;
    const Matrix M = diff_op_matrix(g, a11, b1, m);
    // compare on the resolved band, away from Nyquist
    const Matrix Qh = to_fourier_basis(Q), Mh = to_fourier_basis(M);
    double worst = 0;
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j)
            if (std::abs(g.mode(i)) < 24 && std::abs(g.mode(j)) < 24)
                worst = std::max(worst, std::abs(Qh(i, j) - Mh(i, j)));
    EXPECT_LT(worst, 1e-10);
}

TEST(WeylSymbol, QuarterSecondDerivativeCoefficient) {
    // a = 1 + 0.3 cos x contributes a''/4 to the zeroth-order term
    const SpatialGrid g(32);
    const RealVector a11 = cosine(g, 0.3);
    const auto s = weyl_symbol_of_diff_op(g, a11, Vector::Zero(32), RealVector::Zero(32));
    const Vector zeroth = s.coefficient(0.0).first;
    for (int j = 0; j < 32; ++j) EXPECT_NEAR(zeroth[j].real(), -0.25 * 0.3 * std::cos(g.node(j)), 1e-12);
}

TEST(WeylSymbol, RejectsNonPositivePrincipal) {
    const SpatialGrid g(16);
    RealVector a = RealVector::Ones(16);
    a[2] = -0.1;
    EXPECT_THROW((void)weyl_symbol_of_diff_op(g, a, Vector::Zero(16), RealVector::Zero(16)), SymbolError);
}
