#include "hadamard/config.hpp"
#include "hadamard/oracle.hpp"
#include "hadamard/states.hpp"

#include <gtest/gtest.h>

using namespace hadamard;

namespace {

struct StaticCase {
    ModelCoefficients mc;
    Matrix E;
};

const StaticCase& static_case() {
    static const StaticCase c = [] {
        auto mc = reduce_to_model(preset_metric("static-massive"), SpatialGrid(64));
        Matrix E = energy_operator(detail::model_matrix(mc, 0.0));
        return StaticCase{std::move(mc), std::move(E)};
    }();
    return c;
}

Vector evolve(const Matrix& E, const Vector& v, double t) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(E);
    return es.eigenvectors() *
           (Complex(0, t) * es.eigenvalues().cast<Complex>()).array().exp().matrix().asDiagonal() *
           (es.eigenvectors().adjoint() * v);
}

}  // namespace

TEST(Direct, StaticExactSolution) {
    const auto& [mc, E] = static_case();
    std::mt19937_64 rng(1);
    const Vector v = band_limited_random(mc.grid(), 4, rng);
    const auto sol = solve_cauchy_direct(mc, {v, E * v}, uniform_nodes(1.0, 11));
    for (size_t j = 0; j < sol.nodes.size(); ++j)
        EXPECT_LT(l2_norm(mc.grid(), sol.phi[j] - evolve(E, v, sol.nodes[j])), 1e-8) << j;
}

TEST(Direct, EnergyConserved) {
    const auto& [mc, E] = static_case();
    std::mt19937_64 rng(2);
    const SpatialGrid& g = mc.grid();
    const auto sol = solve_cauchy_direct(mc, {band_limited_random(g, 2, rng), band_limited_random(g, 4, rng)},
                                         uniform_nodes(1.0, 11));
    const double e0 = energy(mc, sol, 0);
    for (size_t j = 1; j < sol.nodes.size(); ++j) EXPECT_NEAR(energy(mc, sol, j), e0, 1e-8 * e0);
}

TEST(Direct, TimeDependentSelfRefinement) {
    const auto mc = reduce_to_model(preset_metric("breathing-metric"), SpatialGrid(64));
    std::mt19937_64 rng(3);
    const SpatialGrid& g = mc.grid();
    const CauchyData f{band_limited_random(g, 4, rng), band_limited_random(g, 2, rng)};
    OracleOptions tight;
    tight.tol = 1e-12;
    const auto a = solve_cauchy_direct(mc, f, uniform_nodes(1.0, 9));
    const auto b = solve_cauchy_direct(mc, f, uniform_nodes(1.0, 9), tight);
    EXPECT_LT(l2_norm(g, a.phi.back() - b.phi.back()), 1e-9);
    const auto fine_nodes = solve_cauchy_direct(mc, f, uniform_nodes(1.0, 65));
    EXPECT_LT(direct_residual(mc, fine_nodes, 32), 1e-5);
}

TEST(Direct, RejectsDataNearNyquist) {
    const auto& [mc, E] = static_case();
    Vector v = Vector::Zero(64);
    v[mc.grid().index_of(30)] = 1.0;
    const Vector f = inverse_fourier(v);
    EXPECT_THROW((void)solve_cauchy_direct(mc, {f, f}, uniform_nodes(1.0, 5)), OracleError);
}

TEST(Symplectic, AntiHermitianAndConserved) {
    const auto mc = reduce_to_model(preset_metric("breathing-metric"), SpatialGrid(64));
    std::mt19937_64 rng(4);
    const SpatialGrid& g = mc.grid();
    const CauchyData f{band_limited_random(g, 2, rng), band_limited_random(g, 3, rng)};
    const CauchyData h{band_limited_random(g, 4, rng), band_limited_random(g, 1, rng)};
    const auto sols = solve_cauchy_direct(mc, {f, h}, uniform_nodes(1.0, 9));
    const Complex s00 = symplectic_form(sols[0], sols[0], 0);
    EXPECT_NEAR(std::abs(std::conj(s00) + s00), 0.0, 1e-12);
    const Complex s0 = symplectic_form(sols[0], sols[1], 0);
    for (size_t j = 1; j < 9; ++j) EXPECT_NEAR(std::abs(symplectic_form(sols[0], sols[1], j) - s0), 0.0, 1e-8);
    // σ at t = 0 against the charge pairing of the data
    EXPECT_NEAR(std::abs(s0 - Complex(0, -1) * charge_pairing(g, f, h)), 0.0, 1e-10);
}

TEST(Frequency, SingleSignAndSymmetric) {
    const auto& [mc, E] = static_case();
    std::mt19937_64 rng(5);
    const Vector v = band_limited_random(mc.grid(), 4, rng);
    const auto nodes = uniform_nodes(8.0, 129);
    const auto pos = solve_cauchy_direct(mc, {v, E * v}, nodes);
    EXPECT_LT(frequency_sign_fraction(pos, -1), 0.01);
    EXPECT_NEAR(frequency_sign_fraction(pos, 1) + frequency_sign_fraction(pos, -1), 1.0, 1e-12);
    const auto cosine = solve_cauchy_direct(mc, {v, Vector::Zero(64)}, nodes);
    EXPECT_NEAR(frequency_sign_fraction(cosine, 1), 0.5, 0.05);
    EXPECT_NEAR(frequency_sign_fraction(cosine, -1), 0.5, 0.05);
}

TEST(Frequency, NeedsEnoughNodes) {
    const auto& [mc, E] = static_case();
    std::mt19937_64 rng(6);
    const Vector v = band_limited_random(mc.grid(), 2, rng);
    const auto sol = solve_cauchy_direct(mc, {v, E * v}, uniform_nodes(1.0, 9));
    EXPECT_THROW((void)frequency_sign_fraction(sol, 1), OracleError);
}
