#include "hadamard/config.hpp"
#include "hadamard/states.hpp"

#include <gtest/gtest.h>

using namespace hadamard;

namespace {

const ParametrixBundle& bundle() {
    static const ParametrixBundle P = [] {
        ParametrixOptions o;
        o.truncation = 4;
        o.t_max = 0.5;
        o.nodes = 9;
        return build_parametrix(reduce_to_model(preset_metric("breathing-metric"), SpatialGrid(64)), o);
    }();
    return P;
}

DecayOptions small_bands() {
    DecayOptions o;
    o.bands = {4, 8, 16};
    return o;
}

Matrix static_operator(const SpatialGrid& g) {
    return detail::model_matrix(reduce_to_model(preset_metric("static-massive"), g), 0.0);
}

}  // namespace

TEST(Canonical, StaticVacuumEqualsCanonicalOfInverseEnergy) {
    const SpatialGrid g(32);
    const Matrix A = static_operator(g);
    const Matrix E = energy_operator(A);
    const auto vac = static_vacuum(g, A);
    const auto can = canonical_state(g, E.inverse());
    EXPECT_LT(relative_deviation(vac.lambda.entries, can.lambda.entries), 1e-10);
}

TEST(Canonical, PureAndPositive) {
    const auto& P = bundle();
    const auto s = canonical_state(P.grid, P.r);
    EXPECT_LT(check_purity(s), 1e-10);
    EXPECT_TRUE(check_positivity(s).pass());
}

TEST(Canonical, MuscBlocksVanish) {
    const auto& P = bundle();
    DecayOptions o;
    o.bands = {4, 8, 16};
    const auto m = check_musc_proxy(canonical_state(P.grid, P.r), P.T_inv, -3.0, o);
    EXPECT_TRUE(m.pass());
}

TEST(Canonical, RejectsNonPositiveR) {
    const SpatialGrid g(16);
    EXPECT_THROW((void)canonical_state(g, -Matrix::Identity(16, 16)), StateError);
}

TEST(Positivity, ZeroFails) {
    const SpatialGrid g(16);
    const TwoPointFunction z{BlockOperator(g, Matrix::Zero(32, 32))};
    const auto rep = check_positivity(z);
    EXPECT_FALSE(rep.pass());
    EXPECT_NEAR(rep.eigmin_minus, -1.0, 1e-12);
}

TEST(Family, ZeroSpecIsCanonical) {
    const auto& P = bundle();
    const Matrix Z = Matrix::Zero(64, 64);
    const auto s = hadamard_family(P, {Z, Z, 0.3 * Matrix::Identity(64, 64)}, -8.0, small_bands());
    EXPECT_LT(relative_deviation(s.lambda.entries, canonical_state(P.grid, P.r).lambda.entries), 1e-9);
}

TEST(Family, GaussianKernelSpec) {
    const auto& P = bundle();
    const Matrix K = gaussian_kernel(P.grid, 0.5);
    const StateSpec spec{K, K, Matrix::Identity(64, 64)};
    const auto s = hadamard_family(P, spec, -6.0, small_bands());
    EXPECT_TRUE(check_positivity(s).pass());
    std::mt19937_64 rng(5);
    const auto fc = check_family_conditions(P.grid, hadamard_tilde(P.grid, spec), 50, rng);
    EXPECT_TRUE(fc.pass());
    DecayOptions o;
    o.bands = {4, 8, 16};
    EXPECT_LE(check_musc_proxy(s, P.T_inv, -6.0, o).minus_minus.slope, -6.0);
}

TEST(Family, RejectsLargeA0) {
    const auto& P = bundle();
    const Matrix Z = Matrix::Zero(64, 64);
    EXPECT_THROW((void)hadamard_family(P, {Z, Z, 2.0 * Matrix::Identity(64, 64)}, -8.0, small_bands()), StateError);
}

TEST(Family, RandomSpecsSatisfyConditions) {
    const auto& P = bundle();
    std::mt19937_64 rng(17);
    for (int i = 0; i < 3; ++i) {
        const StateSpec spec = random_state_spec(P.grid, rng);
        const auto s = hadamard_family(P, spec, -4.0, small_bands());
        EXPECT_TRUE(check_positivity(s).pass()) << i;
        EXPECT_TRUE(check_family_conditions(P.grid, hadamard_tilde(P.grid, spec), 20, rng).pass()) << i;
    }
}

TEST(Pure, ZeroIsCanonical) {
    const auto& P = bundle();
    const auto s = pure_state_from(P, Matrix::Zero(64, 64));
    EXPECT_LT(relative_deviation(s.lambda.entries, canonical_state(P.grid, P.r).lambda.entries), 1e-9);
}

TEST(Pure, SmoothingGivesPureState) {
    const auto& P = bundle();
    std::mt19937_64 rng(8);
    const Matrix a = random_smoothing(P.grid, 3.0, 0.8, rng);
    const auto s = pure_state_from(P, a);
    EXPECT_LT(check_purity(s), 1e-8);
    EXPECT_TRUE(check_positivity(s).pass());
    const auto u = check_u_tilde(P.grid, a);
    EXPECT_LT(u.intertwining, 1e-10);
    EXPECT_LT(u.charge, 1e-9);
    EXPECT_LT(u.projection, 1e-9);
}

TEST(Group, IdentityActsTrivially) {
    const auto& P = bundle();
    const auto G = group_identity(P.grid);
    EXPECT_LT(relative_deviation(group_act(G, P.r), P.r), 1e-14);
    EXPECT_LT(relative_deviation(u_of_G(P.grid, G).entries, Matrix::Identity(128, 128)), 1e-14);
    const auto c = covariance_check(P.grid, G, P.r);
    EXPECT_LT(c.covariance, 1e-12);
}

TEST(Group, ShiftByAntiHermitian) {
    const auto& P = bundle();
    std::mt19937_64 rng(3);
    const Matrix X = random_smoothing(P.grid, 4.0, 0.2, rng);
    const GroupElement G{Matrix::Identity(64, 64), 0.5 * (X - X.adjoint())};
    EXPECT_LT(relative_deviation(group_act(G, P.r), P.r + G.f), 1e-12);
    const auto u = u_of_G(P.grid, G);
    const Matrix pulled = (u.adjoint() * canonical_state(P.grid, P.r).lambda * u).entries;
    EXPECT_LT(relative_deviation(pulled, canonical_state(P.grid, P.r + G.f).lambda.entries), 1e-10);
}

TEST(Group, CovarianceAndComposition) {
    const auto& P = bundle();
    std::mt19937_64 rng(21);
    const auto G1 = random_group_element(P.grid, 0.1, rng);
    const auto G2 = random_group_element(P.grid, 0.1, rng);
    const auto c = covariance_check(P.grid, G1, P.r);
    EXPECT_LT(c.covariance, 1e-10);
    EXPECT_LT(c.charge, 1e-10);
    const Matrix lhs = group_act(compose(G2, G1), P.r);
    const Matrix rhs = group_act(G2, group_act(G1, P.r));
    EXPECT_LT(relative_deviation(lhs, rhs), 1e-10);
}

TEST(Group, RejectsNonAntiHermitianShift) {
    const SpatialGrid g(16);
    const GroupElement G{Matrix::Identity(16, 16), Matrix::Identity(16, 16)};
    EXPECT_THROW(validate_group_element(g, G), StateError);
}

TEST(Kms, ColdLimitIsVacuum) {
    const SpatialGrid g(32);
    const Matrix A = static_operator(g);
    const double emin = std::sqrt(eigmin(A));
    const double beta = 45.0 / emin;
    EXPECT_LT((static_kms(g, A, beta).lambda.entries - static_vacuum(g, A).lambda.entries).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kms, PositiveButMixed) {
    const SpatialGrid g(32);
    const Matrix A = static_operator(g);
    const auto s = static_kms(g, A, 1.0);
    EXPECT_TRUE(check_positivity(s).pass());
    // λqλ − λ is block diagonal with entries n(1+n) in the energy eigenbasis; the lowest energy dominates
    const double nmax = 1.0 / std::expm1(std::sqrt(eigmin(A)));
    EXPECT_NEAR(check_purity(s), nmax * (1 + nmax), 1e-9 * nmax * (1 + nmax));
    EXPECT_THROW((void)static_kms(g, A, 0.0), StateError);
}

TEST(Glue, SingleChartUnchanged) {
    const auto& P = bundle();
    const auto s = canonical_state(P.grid, P.r);
    const auto w = partition_windows(P.grid, 1, 0.5);
    const auto glued = glue_states({{w[0], s}});
    EXPECT_LT(relative_deviation(glued.lambda.entries, s.lambda.entries), 1e-14);
}

TEST(Glue, TwoChartsPositive) {
    const auto& P = bundle();
    const auto s = canonical_state(P.grid, P.r);
    const auto w = partition_windows(P.grid, 2, 0.5);
    EXPECT_LT(partition_defect(w), 1e-12);
    EXPECT_LT(charge_reconstruction(P.grid, w), 1e-12);
    const auto glued = glue_states({{w[0], s}, {w[1], s}});
    EXPECT_TRUE(check_positivity(glued).pass());
    EXPECT_GT(check_purity(glued), 0.0);
}

TEST(Glue, RejectsNonPartition) {
    const auto& P = bundle();
    const auto s = canonical_state(P.grid, P.r);
    EXPECT_THROW((void)glue_states({{RealVector::Constant(64, 0.5), s}}), StateError);
}
