#include "hadamard/config.hpp"
#include "hadamard/egorov.hpp"
#include "hadamard/oracle.hpp"
#include "hadamard/states.hpp"

#include <gtest/gtest.h>

using namespace hadamard;

namespace {

ParametrixOptions small_options(int N) {
    ParametrixOptions o;
    o.truncation = N;
    o.t_max = 0.5;
    o.nodes = 17;
    return o;
}

const ParametrixBundle& static_bundle() {
    static const ParametrixBundle P =
        build_parametrix(reduce_to_model(preset_metric("static-massive"), SpatialGrid(64)), small_options(6));
    return P;
}

const ModelCoefficients& breathing_model() {
    static const ModelCoefficients mc = reduce_to_model(preset_metric("breathing-metric"), SpatialGrid(64));
    return mc;
}

const ParametrixBundle& breathing_bundle(int N) {
    static std::map<int, ParametrixBundle> cache;
    if (!cache.count(N)) cache.emplace(N, build_parametrix(breathing_model(), small_options(N)));
    return cache.at(N);
}

double rel(const Matrix& a, const Matrix& b) { return relative_deviation(a, b); }

}  // namespace

TEST(Epsilon, StaticExpansionMatchesSymbolModule) {
    const SpatialGrid g(32);
    const double m2 = 1.44;
    const auto mc = model_from_coefficients(
        g, [](double, double) { return 1.0; }, [](double, double) { return 0.0; },
        [](double, double) { return 0.0; }, [m2](double, double) { return m2; }, false);
    const auto eps = build_epsilon(mc, uniform_nodes(1.0, 3), 5);
    const auto& e = eps.at(0);
    EXPECT_LT((e.coefficient(-1.0).first.array() - m2 / 2).abs().maxCoeff(), 1e-12);
    EXPECT_LT((e.coefficient(-3.0).first.array() + m2 * m2 / 8).abs().maxCoeff(), 1e-12);
}

TEST(Epsilon, QuantizedIsElliptic) {
    const auto& P = static_bundle();
    EXPECT_GT(epsilon_ellipticity(P.grid, P.E), 0.1);
}

TEST(BuildB, StaticGivesEpsilon) {
    const auto mc = reduce_to_model(preset_metric("static-massive"), SpatialGrid(32));
    const auto eps = build_epsilon(mc, uniform_nodes(0.5, 9), 4);
    const auto b = build_b(eps, 4);
    for (size_t i = 0; i < b.size(); ++i) {
        const auto d = b.at(i) - eps.at(i);
        EXPECT_LT(d.max_abs_coefficient(), 1e-8) << i;
    }
}

TEST(BuildB, ScaledFreeSymbolDegreeZero) {
    // ε = s(t)|k| gives b₀ principal i s'/(2s)
    const SpatialGrid g(32);
    auto s = [](double t) { return 1.0 + 0.2 * std::sin(3.0 * t); };
    auto ds = [](double t) { return 0.6 * std::cos(3.0 * t); };
    const auto nodes = uniform_nodes(0.5, 33);
    std::vector<PolyhomSymbol> syms;
    for (double t : nodes)
        syms.push_back(homogeneous_symbol(g, 1.0, Vector::Constant(32, s(t)), Vector::Constant(32, s(t)), 4));
    const auto b = build_b(TimeSymbol(nodes, syms), 4);
    for (size_t i = 4; i + 4 < nodes.size(); i += 4) {
        const Complex expect(0, ds(nodes[i]) / (2 * s(nodes[i])));
        EXPECT_LT((b.at(i).coefficient(0.0).first.array() - expect).abs().maxCoeff(), 1e-8) << i;
    }
}

TEST(BuildR, PositivityBand) {
    const auto& P = breathing_bundle(4);
    EXPECT_GE(P.positivity_eigmin, 0.25);
    EXPECT_GE(P.positivity_eigmax, P.positivity_eigmin);
}

TEST(BuildT, InverseAndChargeForm) {
    const auto& P = breathing_bundle(4);
    const int n = P.grid.size();
    EXPECT_LT(rel((P.T * P.T_inv).entries, Matrix::Identity(2 * n, 2 * n)), 1e-10);
    const Matrix qt = (P.T_inv.adjoint() * BlockOperator::charge(P.grid) * P.T_inv).entries;
    Matrix expect = Matrix::Identity(2 * n, 2 * n);
    expect.bottomRightCorner(n, n) *= -1.0;
    EXPECT_LT(rel(qt, expect), 1e-10);
}

TEST(BuildT, StaticRootOfHalfEnergy) {
    // for r = E⁻¹ exactly, (r + r†)^{-1/2} = (E/2)^{1/2}
    const SpatialGrid g(32);
    const auto mc = reduce_to_model(preset_metric("static-massive"), g);
    const Matrix E = energy_operator(detail::model_matrix(mc, 0.0));
    const Matrix r = E.inverse();
    const auto [T, Ti] = build_T(g, r);
    EXPECT_LT(rel(T.block(0, 0), sqrt_psd(0.5 * E)), 1e-10);
}

TEST(Propagators, StaticAreExponentials) {
    const auto& P = static_bundle();
    const Matrix& B = P.B[0];
    ASSERT_LT(rel(B, B.adjoint()), 1e-10);
    for (size_t j : {size_t(4), size_t(16)}) {
        const double t = P.nodes[j];
        const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (B + B.adjoint()));
        const Matrix U = es.eigenvectors() *
                         (Complex(0, t) * es.eigenvalues().cast<Complex>()).array().exp().matrix().asDiagonal() *
                         es.eigenvectors().adjoint();
        EXPECT_LT(rel(P.u_plus[j], U), 1e-9) << j;
        const Matrix& u = P.u_plus[j];
        EXPECT_LT(rel(u.adjoint() * u, Matrix::Identity(u.rows(), u.cols())), 1e-10);
    }
}

TEST(Propagators, RecordsConvergence) {
    const auto& P = breathing_bundle(4);
    EXPECT_LT(P.plus_record.change, 1e-9);
    EXPECT_LT(P.minus_record.change, 1e-9);
}

TEST(AssembleU, StaticBranchesAreExponentials) {
    // static B is Hermitian, so d± = 1/2 and data in C±(r) evolve by e^{±itB}
    const auto& P = static_bundle();
    std::mt19937_64 rng(1);
    const Vector y = band_limited_random(P.grid, 4, rng);
    const Matrix& B = P.B[0];
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (B + B.adjoint()));
    auto evolve = [&](double s, const Vector& v) {
        return Vector(es.eigenvectors() *
                      (Complex(0, s) * es.eigenvalues().cast<Complex>()).array().exp().matrix().asDiagonal() *
                      (es.eigenvectors().adjoint() * v));
    };
    const size_t j = 16;
    const CauchyData plus{P.r.adjoint() * y, y}, minus{-P.r * y, y};
    EXPECT_LT(l2_norm(P.grid, assemble_U(P, plus, j).f0 - evolve(P.nodes[j], plus.f0)), 1e-10);
    EXPECT_LT(l2_norm(P.grid, assemble_U(P, minus, j).f0 - evolve(-P.nodes[j], minus.f0)), 1e-10);
}

TEST(AssembleU, StaticEnergyDataNearlyPositiveFrequency) {
    // (f₀, Bf₀) lies in C⁺(r) up to the smoothing difference r − B⁻¹
    const auto& P = static_bundle();
    std::mt19937_64 rng(1);
    const Matrix& B = P.B[0];
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (B + B.adjoint()));
    auto error = [&](int band) {
        const Vector f0 = band_limited_random(P.grid, band, rng);
        const size_t j = 16;
        const Vector expect = es.eigenvectors() *
                              (Complex(0, P.nodes[j]) * es.eigenvalues().cast<Complex>()).array().exp().matrix().asDiagonal() *
                              (es.eigenvectors().adjoint() * f0);
        return l2_norm(P.grid, assemble_U(P, {f0, B * f0}, j).f0 - expect);
    };
    const double e4 = error(4), e8 = error(8);
    EXPECT_LT(e4, 1e-3);
    EXPECT_LT(e8, e4 / 8);
}

TEST(AssembleU, InitialConditionsReproduced) {
    // d₊ + d₋ = 1 and Bd₊ = B†d₋ hold exactly; the f₁ defects vanish only modulo smoothing operators
    const auto& P = breathing_bundle(4);
    const auto d = initial_defects(P);
    EXPECT_LT(operator_norm(d.value_f0), 1e-10);
    EXPECT_LT(operator_norm(d.velocity_f0), 1e-9);
    DecayOptions o;
    o.bands = {4, 8, 16};
    EXPECT_LE(decay_from_fourier(P.grid, to_fourier_basis(d.value_f1), o).slope, -3.0);
    EXPECT_LE(decay_from_fourier(P.grid, to_fourier_basis(d.velocity_f1), o).slope, -3.0);
}

TEST(AssembleU, ImprovesWithTruncation) {
    const auto& mc = breathing_model();
    std::mt19937_64 rng(9);
    const SpatialGrid& g = mc.grid();
    const CauchyData f{band_limited_random(g, 4, rng), band_limited_random(g, 4, rng)};
    const auto sol = solve_cauchy_direct(mc, f, breathing_bundle(2).nodes);
    auto error = [&](int N) {
        const auto& P = breathing_bundle(N);
        const size_t j = P.nodes.size() - 1;
        return l2_norm(g, assemble_U(P, f, j).f0 - sol.phi[j]);
    };
    const double e2 = error(2), e4 = error(4);
    EXPECT_LT(e4, e2 / 4) << e2 << " " << e4;
}

TEST(SplitData, PlusDataHasNoMinusPart) {
    const auto& P = breathing_bundle(4);
    std::mt19937_64 rng(2);
    const Vector y = band_limited_random(P.grid, 3, rng);
    const auto [plus, minus] = split_data(P, {P.r.adjoint() * y, y});
    EXPECT_LT(l2_norm(P.grid, minus.f0) + l2_norm(P.grid, minus.f1), 1e-10);
    const auto [zp, zm] = split_data(P, {Vector::Zero(64), Vector::Zero(64)});
    EXPECT_EQ(l2_norm(P.grid, zp.f0) + l2_norm(P.grid, zm.f1), 0.0);
}

TEST(SplitData, PartsAreChargeOrthogonal) {
    const auto& P = breathing_bundle(4);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 5; ++i) {
        const CauchyData f{band_limited_random(P.grid, 2, rng), band_limited_random(P.grid, 4, rng)};
        const auto [plus, minus] = split_data(P, f);
        EXPECT_LT(std::abs(charge_pairing(P.grid, plus, minus)), 1e-10);
    }
}

TEST(Egorov, SameTimeIsIdentity) {
    const auto& P = breathing_bundle(4);
    Vector a(64);
    for (int j = 0; j < 64; ++j) a[j] = 1.0 + 0.5 * std::cos(P.grid.node(j));
    const auto rep = egorov_check(function_symbol(P.grid, a), P, breathing_model(), 0, -1, {2, 4});
    for (const auto& s : rep.samples) EXPECT_LT(s.deviation, 0.1);
}

TEST(Options, RejectsBadWindow) {
    EXPECT_THROW((void)uniform_nodes(0.0, 5), std::invalid_argument);
    EXPECT_THROW((void)uniform_nodes(1.0, 1), std::invalid_argument);
}
