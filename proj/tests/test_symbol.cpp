#include "hadamard/symbol.hpp"

#include <gtest/gtest.h>

using namespace hadamard;

namespace {

Vector constant(const SpatialGrid& g, Complex c) { return Vector::Constant(g.size(), c); }

Vector cosine(const SpatialGrid& g, double a) {
    Vector v(g.size());
    for (int j = 0; j < g.size(); ++j) v[j] = 1.0 + a * std::cos(g.node(j));
    return v;
}

}  // namespace

TEST(Symbol, EvalDegreeOne) {
    const SpatialGrid g(32);
    const auto a = homogeneous_symbol(g, 1.0, constant(g, 1.0), constant(g, 1.0));
    EXPECT_NEAR(std::abs(a.eval(0, 4.0) - 4.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(a.eval(0, -4.0) - 4.0), 0.0, 1e-14);
}

TEST(Symbol, EvalBranchCoefficient) {
    const SpatialGrid g(32);
    const auto a = homogeneous_symbol(g, -1.0, constant(g, 2.0), constant(g, 5.0));
    EXPECT_NEAR(std::abs(a.eval(3, 8.0) - 0.25), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(a.eval(3, -8.0) - 0.625), 0.0, 1e-14);
}

TEST(Symbol, CutoffVanishesNearZero) {
    const SpatialGrid g(32);
    const auto a = homogeneous_symbol(g, -2.0, constant(g, 1.0), constant(g, 1.0));
    EXPECT_EQ(a.eval(0, 0.5), Complex(0.0));
    EXPECT_NEAR(std::abs(a.eval(0, 3.0) - 1.0 / 9.0), 0.0, 1e-14);
}

TEST(Symbol, RejectsComponentAboveTop) {
    const SpatialGrid g(16);
    PolyhomSymbol a(g, 1.0, 3);
    EXPECT_THROW(a.add(2.0, constant(g, 1), constant(g, 1)), SymbolError);
    EXPECT_THROW(a.add(0.5, constant(g, 1), constant(g, 1)), SymbolError);
}

TEST(Symbol, DropsComponentsBelowReliableRange) {
    const SpatialGrid g(16);
    PolyhomSymbol a(g, 1.0, 2);
    a.add(-3.0, constant(g, 1), constant(g, 1));
    EXPECT_TRUE(a.components().empty());
}

TEST(Moyal, ProductOfFunctionsIsPointwise) {
    const SpatialGrid g(32);
    const auto a = function_symbol(g, cosine(g, 0.3));
    const auto b = function_symbol(g, cosine(g, -0.2));
    const auto c = moyal_product(a, b, 4);
    const Vector expect = cosine(g, 0.3).cwiseProduct(cosine(g, -0.2));
    EXPECT_LT((c.coefficient(0.0).first - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Moyal, FirstOrderTermOfMultiplierAndMomentum) {
    // v(x) # k = v k + (i/2) v', so that Op(v # k) = v D
    const SpatialGrid g(32);
    const Vector v = cosine(g, 0.5);
    const auto a = function_symbol(g, v);
    PolyhomSymbol k(g, 1.0, PolyhomSymbol::kExact);
    k.add(1.0, constant(g, 1.0), constant(g, -1.0), true);
    const auto c = moyal_product(a, k, 3);
    const Vector dv = spectral_derivative(g, v, 1);
    EXPECT_LT((c.coefficient(0.0).first - Complex(0, 0.5) * dv).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((c.coefficient(1.0).first - v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Moyal, CommutatorWithConstantVanishes) {
    const SpatialGrid g(32);
    const auto a = homogeneous_symbol(g, 1.0, cosine(g, 0.2), cosine(g, 0.2));
    const auto c = moyal_commutator(a, constant_symbol(g, 3.0), 4);
    EXPECT_LT(c.max_abs_coefficient(), 1e-12);
}

TEST(AsymptoticInverse, AbsoluteValue) {
    const SpatialGrid g(32);
    const auto a = homogeneous_symbol(g, 1.0, constant(g, 1.0), constant(g, 1.0));
    const auto b = asymptotic_inverse(a, 4);
    EXPECT_LT((b.coefficient(-1.0).first - constant(g, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& c : b.components()) {
        if (c.degree < -1.5) {
            EXPECT_LT(c.plus.cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(AsymptoticInverse, VariableCoefficientRemainder) {
    const SpatialGrid g(64);
    const auto a = homogeneous_symbol(g, 1.0, cosine(g, 0.3), cosine(g, 0.3));
    const int N = 4;
    const auto b = asymptotic_inverse(a, N);
    const auto prod = moyal_product(a, b, N);
    EXPECT_LT((prod.coefficient(0.0).first - constant(g, 1.0)).cwiseAbs().maxCoeff(), 1e-10);
    for (int j = 1; j <= N - 1; ++j) EXPECT_LT(prod.coefficient(-j).first.cwiseAbs().maxCoeff(), 1e-9) << j;
}

TEST(AsymptoticInverse, RejectsDegeneratePrincipal) {
    const SpatialGrid g(16);
    Vector p = constant(g, 1.0);
    p[3] = 0.0;
    EXPECT_THROW((void)asymptotic_inverse(homogeneous_symbol(g, 1.0, p, p), 3), SymbolError);
}

TEST(AsymptoticSqrt, BinomialSeries) {
    // sqrt(k² + m²) = |k| + m²/(2|k|) − m⁴/(8|k|³) + …
    const SpatialGrid g(32);
    const double m2 = 2.0;
    PolyhomSymbol a(g, 2.0, PolyhomSymbol::kExact);
    a.add(2.0, constant(g, 1.0), constant(g, 1.0), true);
    a.add(0.0, constant(g, m2), constant(g, m2), true);
    const auto e = asymptotic_sqrt(a, 5);
    EXPECT_LT((e.coefficient(1.0).first - constant(g, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((e.coefficient(-1.0).first - constant(g, m2 / 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((e.coefficient(-3.0).first - constant(g, -m2 * m2 / 8)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(e.coefficient(0.0).first.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AsymptoticSqrt, SquareReproducesSymbol) {
    const SpatialGrid g(64);
    PolyhomSymbol a(g, 2.0, PolyhomSymbol::kExact);
    a.add(2.0, cosine(g, 0.2), cosine(g, 0.2), true);
    a.add(0.0, cosine(g, -0.4), cosine(g, -0.4), true);
    const int N = 4;
    const auto e = asymptotic_sqrt(a, N);
    const auto sq = moyal_product(e, e, N);
    for (int j = 0; j <= N - 1; ++j) {
        const Vector diff = sq.coefficient(2.0 - j).first - a.coefficient(2.0 - j).first;
        EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-9) << j;
    }
    EXPECT_LT(e.max_abs_imag(), 1e-12);
}

TEST(AsymptoticSqrt, RejectsNonPositive) {
    const SpatialGrid g(16);
    PolyhomSymbol a(g, 2.0, PolyhomSymbol::kExact);
    a.add(2.0, constant(g, -1.0), constant(g, -1.0), true);
    EXPECT_THROW((void)asymptotic_sqrt(a, 3), SymbolError);
}

TEST(TimeSymbol, DerivativeOfLinearInTime) {
    const SpatialGrid g(16);
    std::vector<double> t;
    std::vector<PolyhomSymbol> s;
    for (int i = 0; i < 17; ++i) {
        t.push_back(0.1 * i);
        s.push_back(homogeneous_symbol(g, 1.0, constant(g, 1.0 + 2.0 * t.back()), constant(g, 1.0 + 2.0 * t.back())));
    }
    const TimeSymbol ts(t, s);
    const auto d = ts.derivative();
    for (size_t i = 0; i < d.size(); ++i)
        EXPECT_LT((d.at(i).coefficient(1.0).first - constant(g, 2.0)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FixedPoint, RejectsMapThatDoesNotGainDegree) {
    const SpatialGrid g(16);
    const TimeSymbol a({0.0, 1.0}, {constant_symbol(g, 1.0), constant_symbol(g, 1.0)});
    EXPECT_THROW((void)fixed_point_solve(a, [](const TimeSymbol& x) { return x; }, 3), SymbolError);
}
