#pragma once

#include "parametrix.hpp"
#include "report.hpp"

namespace hadamard {

struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Covariance λ ≡ λ₊ on Cauchy data; λ₋ = λ − q.
struct TwoPointFunction {
    BlockOperator lambda;

    [[nodiscard]] const SpatialGrid& grid() const { return lambda.grid; }
    [[nodiscard]] BlockOperator plus() const { return lambda; }
    [[nodiscard]] BlockOperator minus() const { return lambda - BlockOperator::charge(lambda.grid); }
};

namespace detail {
inline Matrix zeros(const SpatialGrid& g) { return Matrix::Zero(g.size(), g.size()); }
inline Matrix eye(const SpatialGrid& g) { return Matrix::Identity(g.size(), g.size()); }

inline BlockOperator diag_blocks(const SpatialGrid& g, const Matrix& a, const Matrix& d) {
    return BlockOperator::from_blocks(g, a, zeros(g), zeros(g), d);
}

inline DecayReport block_decay(const SpatialGrid& g, const Matrix& block, const DecayOptions& opt) {
    return decay_from_fourier(g, to_fourier_basis(block), opt);
}
}  // namespace detail

/// λ(r) = [[(r+r†)⁻¹, (r+r†)⁻¹r], [r†(r+r†)⁻¹, r†(r+r†)⁻¹r]].
[[nodiscard]] inline TwoPointFunction canonical_state(const SpatialGrid& g, const Matrix& r) {
    const Matrix S = r + r.adjoint();
    if (eigmin(S) <= 0.0) throw StateError("r + r† is not positive definite");
    const Matrix Si = hermitian_function(S, [](double x) { return 1.0 / x; });
    return {BlockOperator::from_blocks(g, Si, Si * r, r.adjoint() * Si, r.adjoint() * Si * r)};
}

/// λ̃ = (T⁻¹)†λT⁻¹.
[[nodiscard]] inline BlockOperator lambda_tilde(const TwoPointFunction& s, const BlockOperator& T_inv) {
    return T_inv.adjoint() * s.lambda * T_inv;
}

/// Pulls λ̃ back to Cauchy data: λ = T†λ̃T.
[[nodiscard]] inline TwoPointFunction from_tilde(const BlockOperator& tilde, const BlockOperator& T) {
    BlockOperator l = T.adjoint() * tilde * T;
    l.entries = 0.5 * (l.entries + l.entries.adjoint());
    return {l};
}

/// (a₋∞, b₋∞, a₀) parametrizing the Hadamard family.
struct StateSpec {
    Matrix a_inf;
    Matrix b_inf;
    Matrix a0;
};

struct SpecValidation {
    DecayReport a_decay, b_decay;
    double a0_norm = 0.0;
};

/// Checks ‖a₀‖ ≤ 1 and that a₋∞, b₋∞ pass the smoothing diagnostic at `slope`.
[[nodiscard]] inline SpecValidation validate_spec(const SpatialGrid& g, const StateSpec& s, double slope,
                                                  const DecayOptions& opt = {}) {
    for (const Matrix* m : {&s.a_inf, &s.b_inf, &s.a0})
        if (m->rows() != g.size() || m->cols() != g.size()) throw StateError("state spec blocks must be n×n");
    SpecValidation v{detail::block_decay(g, s.a_inf, opt), detail::block_decay(g, s.b_inf, opt), operator_norm(s.a0)};
    if (v.a0_norm > 1.0 + 1e-12) throw StateError("a0 has operator norm " + std::to_string(v.a0_norm) + " > 1");
    if (!v.a_decay.passes(slope))
        throw StateError("a_inf is not smoothing: slope " + std::to_string(v.a_decay.slope));
    if (!v.b_decay.passes(slope))
        throw StateError("b_inf is not smoothing: slope " + std::to_string(v.b_decay.slope));
    return v;
}

/// λ̃₊₊ = 1 + b†b, λ̃₋₋ = a†a, λ̃₊₋ = λ̃₋₊† = b†a₀a, pulled back by T.
[[nodiscard]] inline BlockOperator hadamard_tilde(const SpatialGrid& g, const StateSpec& s) {
    const Matrix& a = s.a_inf;
    const Matrix& b = s.b_inf;
    const Matrix pm = b.adjoint() * s.a0 * a;
    return BlockOperator::from_blocks(g, detail::eye(g) + b.adjoint() * b, pm, pm.adjoint(), a.adjoint() * a);
}

[[nodiscard]] inline TwoPointFunction hadamard_family(const ParametrixBundle& P, const StateSpec& s,
                                                      double smoothing_slope = -8.0, const DecayOptions& opt = {}) {
    (void)validate_spec(P.grid, s, smoothing_slope, opt);
    return from_tilde(hadamard_tilde(P.grid, s), P.T);
}

/// Pure state in canonical form: λ̃ = [[1+aa†, a(1+a†a)^{1/2}], [(1+a†a)^{1/2}a†, a†a]].
[[nodiscard]] inline BlockOperator pure_tilde(const SpatialGrid& g, const Matrix& a) {
    const Matrix root_right = sqrt_psd(detail::eye(g) + a.adjoint() * a);
    const Matrix pm = a * root_right;
    return BlockOperator::from_blocks(g, detail::eye(g) + a * a.adjoint(), pm, pm.adjoint(), a.adjoint() * a);
}

[[nodiscard]] inline TwoPointFunction pure_state_from(const ParametrixBundle& P, const Matrix& a) {
    return from_tilde(pure_tilde(P.grid, a), P.T);
}

/// ũ = [[(1+aa†)^{1/2}, a], [a†, (1+a†a)^{1/2}]].
[[nodiscard]] inline BlockOperator u_tilde(const SpatialGrid& g, const Matrix& a) {
    return BlockOperator::from_blocks(g, sqrt_psd(detail::eye(g) + a * a.adjoint()), a, a.adjoint(),
                                      sqrt_psd(detail::eye(g) + a.adjoint() * a));
}

struct UTildeCheck {
    double intertwining = 0.0;  // a(1+a†a)^{1/2} − (1+aa†)^{1/2}a
    double charge = 0.0;        // ũ†q̃ũ − q̃
    double projection = 0.0;    // ũ†diag(1,0)ũ − λ̃(a)
};

[[nodiscard]] inline UTildeCheck check_u_tilde(const SpatialGrid& g, const Matrix& a) {
    const Matrix I = detail::eye(g), Z = detail::zeros(g);
    const BlockOperator u = u_tilde(g, a);
    const BlockOperator qt = detail::diag_blocks(g, I, -I);
    const BlockOperator p = detail::diag_blocks(g, I, Z);
    const Matrix lhs = a * sqrt_psd(I + a.adjoint() * a), rhs = sqrt_psd(I + a * a.adjoint()) * a;
    return {relative_deviation(lhs, rhs), relative_deviation((u.adjoint() * qt * u).entries, qt.entries),
            relative_deviation((u.adjoint() * p * u).entries, pure_tilde(g, a).entries)};
}

struct PositivityReport {
    double eigmin_plus = 0.0;   // eigmin λ
    double eigmin_minus = 0.0;  // eigmin(λ − q)
    double tolerance = 0.0;
    [[nodiscard]] bool pass() const { return eigmin_plus >= -tolerance && eigmin_minus >= -tolerance; }
};

/// Block eigmin of λ and λ − q against the tolerance 1e-10·n·‖λ‖.
[[nodiscard]] inline PositivityReport check_positivity(const TwoPointFunction& s) {
    const double norm = std::max(1.0, s.lambda.entries.cwiseAbs().maxCoeff());
    return {eigmin(s.lambda.entries), eigmin(s.minus().entries), 1e-10 * s.grid().size() * norm};
}

/// ‖λq⁻¹λ − λ‖ in operator norm (q⁻¹ = q).
[[nodiscard]] inline double check_purity(const TwoPointFunction& s) {
    const Matrix& l = s.lambda.entries;
    return operator_norm(l * BlockOperator::charge(s.grid()).entries * l - l);
}

struct MuscReport {
    DecayReport minus_minus, plus_minus, minus_plus, one_minus_plus_plus;
    double threshold = 0.0;

    [[nodiscard]] std::vector<const DecayReport*> blocks() const {
        return {&minus_minus, &plus_minus, &minus_plus, &one_minus_plus_plus};
    }
    [[nodiscard]] double worst_slope() const {
        double w = -std::numeric_limits<double>::infinity();
        for (auto* b : blocks()) w = std::max(w, b->slope);
        return w;
    }
    [[nodiscard]] bool pass() const {
        for (auto* b : blocks())
            if (!b->passes(threshold)) return false;
        return true;
    }
};

/// Decay slopes of λ̃₋₋, λ̃₊₋, λ̃₋₊ and 1 − λ̃₊₊.
[[nodiscard]] inline MuscReport check_musc_proxy(const TwoPointFunction& s, const BlockOperator& T_inv,
                                                 double threshold, const DecayOptions& opt = {}) {
    const SpatialGrid& g = s.grid();
    const BlockOperator t = lambda_tilde(s, T_inv);
    return {detail::block_decay(g, t.block(1, 1), opt), detail::block_decay(g, t.block(0, 1), opt),
            detail::block_decay(g, t.block(1, 0), opt), detail::block_decay(g, detail::eye(g) - t.block(0, 0), opt),
            threshold};
}

/// max |⟨u|Xv⟩| / (⟨u|Pu⟩⟨v|Qv⟩)^{1/2} over seeded low-mode vectors.
[[nodiscard]] inline double cauchy_schwarz_ratio(const SpatialGrid& g, const Matrix& X, const Matrix& P,
                                                 const Matrix& Q, int samples, std::mt19937_64& rng) {
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Vector u = low_mode_random(g, 12, rng), v = low_mode_random(g, 12, rng);
        const double lhs = std::abs(u.dot(X * v));
        if (lhs == 0.0) continue;
        const double pu = std::real(u.dot(P * u)), qv = std::real(v.dot(Q * v));
        worst = std::max(worst, lhs / std::sqrt(std::max(pu * qv, 1e-300)));
    }
    return worst;
}

/// Positivity conditions on λ̃: λ̃₊₊ ≥ 1 and λ̃₋₋ ≥ 0, the two Cauchy–Schwarz bounds on λ̃₊₋ (sampled),
/// and their block forms λ̃ ≥ 0, λ̃ ≥ q̃.
struct FamilyConditions {
    double eigmin_pp_minus_one = 0.0;
    double eigmin_mm = 0.0;
    double cs_ratio = 0.0;          // against λ̃₊₊, λ̃₋₋
    double cs_shifted_ratio = 0.0;  // against λ̃₊₊ − 1, λ̃₋₋ + 1
    double eigmin_tilde = 0.0;
    double eigmin_tilde_minus_q = 0.0;
    double tolerance = 0.0;

    [[nodiscard]] bool pass() const {
        const double t = tolerance;
        return eigmin_pp_minus_one >= -t && eigmin_mm >= -t && cs_ratio <= 1.0 + 1e-9 &&
               cs_shifted_ratio <= 1.0 + 1e-9 && eigmin_tilde >= -t && eigmin_tilde_minus_q >= -t;
    }
};

[[nodiscard]] inline FamilyConditions check_family_conditions(const SpatialGrid& g, const BlockOperator& tilde,
                                                              int samples, std::mt19937_64& rng) {
    const Matrix I = detail::eye(g);
    const Matrix pp = tilde.block(0, 0), pm = tilde.block(0, 1), mm = tilde.block(1, 1);
    const BlockOperator qt = detail::diag_blocks(g, I, -I);
    const double norm = std::max(1.0, tilde.entries.cwiseAbs().maxCoeff());
    return {eigmin(pp - I),
            eigmin(mm),
            cauchy_schwarz_ratio(g, pm, pp, mm, samples, rng),
            cauchy_schwarz_ratio(g, pm, pp - I, mm + I, samples, rng),
            eigmin(tilde.entries),
            eigmin((tilde - qt).entries),
            1e-10 * g.size() * norm};
}

/// (g, f) with g − 1 and f = −f† smoothing.
struct GroupElement {
    Matrix g;
    Matrix f;
};

[[nodiscard]] inline GroupElement group_identity(const SpatialGrid& grid) {
    return {detail::eye(grid), detail::zeros(grid)};
}

/// Checks anti-Hermitian f and invertible g (condition number below `max_condition`).
inline void validate_group_element(const SpatialGrid& grid, const GroupElement& G, double max_condition = 1e8) {
    if (G.g.rows() != grid.size() || G.f.rows() != grid.size()) throw StateError("group element has wrong size");
    const double scale = std::max(1.0, G.f.cwiseAbs().maxCoeff());
    if ((G.f + G.f.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw StateError("f is not anti-Hermitian");
    Eigen::JacobiSVD<Matrix> svd(G.g);
    const auto& sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0) || sv.maxCoeff() / sv.minCoeff() > max_condition)
        throw StateError("g is not safely invertible");
}

/// G₂G₁ = (g₂g₁, (g₂†)⁻¹f₁g₂⁻¹ + f₂).
[[nodiscard]] inline GroupElement compose(const GroupElement& G2, const GroupElement& G1) {
    const Matrix g2i = G2.g.inverse();
    return {G2.g * G1.g, g2i.adjoint() * G1.f * g2i + G2.f};
}

/// α_G(r) = (g†)⁻¹ r g⁻¹ + f, refusing results whose Hermitian part is not positive.
[[nodiscard]] inline Matrix group_act(const GroupElement& G, const Matrix& r) {
    const Matrix gi = G.g.inverse();
    Matrix out = gi.adjoint() * r * gi + G.f;
    if (eigmin(out + out.adjoint()) <= 0.0) throw StateError("α_G(r) lost positivity of r + r†");
    return out;
}

/// u_G = [[g†, 0], [0, g⁻¹]][[1, f], [0, 1]].
[[nodiscard]] inline BlockOperator u_of_G(const SpatialGrid& grid, const GroupElement& G) {
    const Matrix gi = G.g.inverse();
    return BlockOperator::from_blocks(grid, G.g.adjoint(), G.g.adjoint() * G.f, detail::zeros(grid), gi);
}

struct CovarianceReport {
    double covariance = 0.0;  // λ(α_G r) − u†λ(r)u
    double charge = 0.0;      // u†qu − q
};

[[nodiscard]] inline CovarianceReport covariance_check(const SpatialGrid& grid, const GroupElement& G,
                                                       const Matrix& r) {
    const BlockOperator u = u_of_G(grid, G);
    const BlockOperator q = BlockOperator::charge(grid);
    const TwoPointFunction moved = canonical_state(grid, group_act(G, r));
    const BlockOperator pulled = u.adjoint() * canonical_state(grid, r).lambda * u;
    return {relative_deviation(moved.lambda.entries, pulled.entries),
            relative_deviation((u.adjoint() * q * u).entries, q.entries)};
}

/// Smooth random n×n operator: Fourier-basis entries with Gaussian envelope exp(−(m²+m'²)/(2w²)),
/// scaled to operator norm `norm`.
[[nodiscard]] inline Matrix random_smoothing(const SpatialGrid& g, double width, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix F(g.size(), g.size());
    for (int i = 0; i < g.size(); ++i)
        for (int j = 0; j < g.size(); ++j) {
            const double m = g.mode(i), mp = g.mode(j);
            const double env = std::exp(-(m * m + mp * mp) / (2 * width * width));
            F(i, j) = env < 1e-300 ? Complex(0) : env * Complex(normal(rng), normal(rng));
        }
    Matrix X = to_position_basis(F);
    const double s = operator_norm(X);
    return s > 0 ? Matrix(X * (norm / s)) : X;
}

/// Periodic Gaussian (von Mises) kernel κ(x,y) = exp((cos(x−y) − 1)/w²) times the quadrature weight.
[[nodiscard]] inline Matrix gaussian_kernel(const SpatialGrid& g, double width) {
    Matrix K(g.size(), g.size());
    for (int i = 0; i < g.size(); ++i)
        for (int j = 0; j < g.size(); ++j)
            K(i, j) = std::exp((std::cos(g.unit() * (g.node(i) - g.node(j))) - 1.0) / (width * width)) * g.spacing();
    return K;
}

/// Random anti-Hermitian smoothing f and g = 1 + smoothing.
[[nodiscard]] inline GroupElement random_group_element(const SpatialGrid& grid, double size, std::mt19937_64& rng) {
    const Matrix X = random_smoothing(grid, 4.0, size, rng);
    const Matrix Y = random_smoothing(grid, 4.0, size, rng);
    return {detail::eye(grid) + Y, 0.5 * (X - X.adjoint())};
}

[[nodiscard]] inline StateSpec random_state_spec(const SpatialGrid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix a0 = random_smoothing(g, 6.0, 1.0, rng) + 0.5 * detail::eye(g);
    a0 *= u(rng) / operator_norm(a0);
    return {random_smoothing(g, 3.0, 2.0 * u(rng), rng), random_smoothing(g, 3.0, 2.0 * u(rng), rng), a0};
}

/// E = A^{1/2} by eigendecomposition.
[[nodiscard]] inline Matrix energy_operator(const Matrix& A) {
    if (eigmin(A) <= 0.0) throw StateError("static operator is not positive definite");
    return sqrt_psd(A);
}

/// λ_vac = ½[[E, 1], [1, E⁻¹]].
[[nodiscard]] inline TwoPointFunction static_vacuum(const SpatialGrid& g, const Matrix& A) {
    const Matrix E = energy_operator(A);
    const Matrix Ei = hermitian_function(E, [](double x) { return 1.0 / x; });
    return {BlockOperator::from_blocks(g, 0.5 * E, 0.5 * detail::eye(g), 0.5 * detail::eye(g), 0.5 * Ei)};
}

/// Bose occupation n = (e^{βE} − 1)⁻¹ as an operator.
[[nodiscard]] inline Matrix bose_occupation(const Matrix& E, double beta) {
    if (!(beta > 0)) throw StateError("inverse temperature must be positive");
    return hermitian_function(E, [beta](double x) { return 1.0 / std::expm1(beta * x); });
}

/// λ_KMS = ½[[E(1+2n), 1], [1, E⁻¹(1+2n)]], using 1 + 2n = coth(βE/2).
[[nodiscard]] inline TwoPointFunction static_kms(const SpatialGrid& g, const Matrix& A, double beta) {
    if (!(beta > 0)) throw StateError("inverse temperature must be positive");
    const Matrix E = energy_operator(A);
    const Matrix top = hermitian_function(E, [beta](double x) { return x / std::tanh(0.5 * beta * x); });
    const Matrix bot = hermitian_function(E, [beta](double x) { return 1.0 / (x * std::tanh(0.5 * beta * x)); });
    return {BlockOperator::from_blocks(g, 0.5 * top, 0.5 * detail::eye(g), 0.5 * detail::eye(g), 0.5 * bot)};
}

/// Smooth transition 0 → 1 on [0,1], flat to all orders at both ends.
[[nodiscard]] inline double smooth_transition(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

/// `count` windows χ_n on the torus with Σχ_n² = 1: bumps centred at equal spacing, each rising over
/// `overlap` (a fraction of the spacing), normalized, with the remaining defect folded into the last.
[[nodiscard]] inline std::vector<RealVector> partition_windows(const SpatialGrid& g, int count, double overlap) {
    if (count < 1) throw StateError("need at least one window");
    if (!(overlap > 0.0 && overlap <= 1.0)) throw StateError("window overlap must lie in (0, 1]");
    const int n = g.size();
    std::vector<RealVector> raw(count, RealVector::Zero(n));
    if (count == 1) {
        raw[0].setOnes();
        return raw;
    }
    const double L = g.length(), spacing = L / count, ramp = overlap * spacing;
    for (int c = 0; c < count; ++c) {
        const double lo = c * spacing;
        for (int i = 0; i < n; ++i) {
            double x = std::fmod(g.node(i) - lo + L, L);
            // plateau on [ramp/2, spacing − ramp/2], ramps of width `ramp` around both ends
            if (x > L - ramp / 2) x -= L;
            const double up = smooth_transition((x + ramp / 2) / ramp);
            const double down = 1.0 - smooth_transition((x - spacing + ramp / 2) / ramp);
            raw[c][i] = up * down;
        }
    }
    RealVector total = RealVector::Zero(n);
    for (const auto& r : raw) total += r.cwiseAbs2();
    std::vector<RealVector> chi;
    for (const auto& r : raw) chi.push_back(r.cwiseQuotient(total.cwiseSqrt()));
    RealVector rest = RealVector::Ones(n);
    for (int c = 0; c + 1 < count; ++c) rest -= chi[c].cwiseAbs2();
    chi.back() = rest.cwiseMax(0.0).cwiseSqrt();
    return chi;
}

[[nodiscard]] inline double partition_defect(const std::vector<RealVector>& chi) {
    RealVector s = RealVector::Zero(chi.front().size());
    for (const auto& c : chi) s += c.cwiseAbs2();
    return (s.array() - 1.0).abs().maxCoeff();
}

struct Chart {
    RealVector window;
    TwoPointFunction state;
};

/// λ = Σ (χ_n⊗1₂)†λ_n(χ_n⊗1₂).
[[nodiscard]] inline TwoPointFunction glue_states(const std::vector<Chart>& charts, double tol = 1e-12) {
    if (charts.empty()) throw StateError("no charts to glue");
    std::vector<RealVector> w;
    for (const auto& c : charts) w.push_back(c.window);
    const double defect = partition_defect(w);
    if (defect > tol) throw StateError("windows are not a partition of unity, defect " + std::to_string(defect));
    const SpatialGrid& g = charts.front().state.grid();
    Matrix sum = Matrix::Zero(2 * g.size(), 2 * g.size());
    for (const auto& c : charts) {
        const Matrix X = c.window.cast<Complex>().asDiagonal();
        const Matrix chi = detail::diag_blocks(g, X, X).entries;
        sum += chi.adjoint() * c.state.lambda.entries * chi;
    }
    return {BlockOperator(g, sum)};
}

/// Σ (χ_n⊗1₂)†q(χ_n⊗1₂) − q.
[[nodiscard]] inline double charge_reconstruction(const SpatialGrid& g, const std::vector<RealVector>& chi) {
    const BlockOperator q = BlockOperator::charge(g);
    Matrix sum = Matrix::Zero(2 * g.size(), 2 * g.size());
    for (const auto& c : chi) {
        const Matrix X = c.cast<Complex>().asDiagonal();
        const Matrix m = detail::diag_blocks(g, X, X).entries;
        sum += m.adjoint() * q.entries * m;
    }
    return (sum - q.entries).cwiseAbs().maxCoeff();
}

}  // namespace hadamard
