#pragma once

#include "geometry.hpp"
#include "matrix_functions.hpp"

namespace hadamard {

struct ParametrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParametrixOptions {
    int truncation = 6;
    double t_max = 1.0;
    int nodes = 65;
    double r_cutoff = 2.0;        // initial radius of the low-band correction of r
    double max_r_cutoff = -1.0;   // -1: n/8 wavenumber units
    double low_band = 2.0;        // radius of the block where the symbol cutoff acts
    double positivity_floor = 0.25;
    int stencil_order = 8;
    int interpolation_points = 8;
    double propagator_tol = 1e-9;
    int max_refinements = 7;
    bool static_shortcut = true;
};

[[nodiscard]] inline std::vector<double> uniform_nodes(double t_max, int count) {
    if (count < 2 || !(t_max > 0)) throw std::invalid_argument("time window needs t_max > 0 and at least 2 nodes");
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) t[i] = t_max * i / (count - 1);
    return t;
}

struct CauchyData {
    Vector f0;
    Vector f1;
};

/// (f|qg) = ⟨f₀,g₁⟩ + ⟨f₁,g₀⟩
[[nodiscard]] inline Complex charge_pairing(const SpatialGrid& g, const CauchyData& f, const CauchyData& h) {
    return inner(g, f.f0, h.f1) + inner(g, f.f1, h.f0);
}

struct PropagatorRecord {
    int substeps = 0;
    double change = 0.0;  // difference between the last two refinements
};

struct ParametrixBundle {
    SpatialGrid grid;
    std::vector<double> nodes;
    int truncation = 0;
    double r_cutoff = 0.0;
    double low_band = 0.0;
    bool static_model = false;
    TimeSymbol epsilon;
    TimeSymbol b;
    std::vector<Matrix> B;   // regularized quantized b(t) per node
    Matrix E;                // regularized quantized ε(0), Hermitian positive
    Matrix r;
    Matrix d_plus, d_minus;
    std::vector<Matrix> u_plus, u_minus;
    BlockOperator T, T_inv;
    PropagatorRecord plus_record, minus_record;
    double positivity_eigmin = 0.0;  // eigmin of E^{1/2}(r + r†)E^{1/2}
    double positivity_eigmax = 0.0;
};

/// Per-node asymptotic square roots of the model symbol.
[[nodiscard]] inline TimeSymbol build_epsilon(const ModelCoefficients& mc, const std::vector<double>& nodes, int N,
                                              int stencil_order = 8) {
    std::vector<PolyhomSymbol> eps;
    std::optional<PolyhomSymbol> frozen;
    for (double t : nodes) {
        if (!mc.time_dependent() && frozen) {
            eps.push_back(*frozen);
            continue;
        }
        eps.push_back(asymptotic_sqrt(mc.symbol(t), N));
        frozen = eps.back();
    }
    return {nodes, std::move(eps), stencil_order};
}

/// ε#ε − a per node.
[[nodiscard]] inline std::vector<PolyhomSymbol> epsilon_remainder(const ModelCoefficients& mc, const TimeSymbol& eps,
                                                                  int N) {
    std::vector<PolyhomSymbol> out;
    for (size_t i = 0; i < eps.size(); ++i) out.push_back(moyal_product(eps.at(i), eps.at(i), N) - mc.symbol(eps.nodes()[i]));
    return out;
}

/// b = ε + b₀ with b₀ = (2ε)^{(−1)}#i∂ₜε + (2ε)^{(−1)}#([ε,b₀] + i∂ₜb₀ − b₀#b₀).
[[nodiscard]] inline TimeSymbol build_b(const TimeSymbol& eps, int N) {
    const Complex I(0, 1);
    const TimeSymbol eps_t = eps.derivative();
    std::vector<PolyhomSymbol> inv2e;
    for (const auto& e : eps.symbols()) inv2e.push_back(asymptotic_inverse(2.0 * e, N));
    const TimeSymbol a0 = eps.map([&](const PolyhomSymbol&, size_t i) {
        return moyal_product(inv2e[i], I * eps_t.at(i), N).rebased(0.0, N - 1);
    });
    auto F = [&](const TimeSymbol& b0) {
        const TimeSymbol b0_t = b0.derivative();
        return b0.map([&](const PolyhomSymbol& s, size_t i) {
            const PolyhomSymbol inner_sym = combine(moyal_commutator(eps.at(i), s, N), 1.0, b0_t.at(i), I) -
                                            moyal_product(s, s, N);
            return moyal_product(inv2e[i], inner_sym.rebased(0.0, N - 1), N).rebased(0.0, N - 1);
        });
    };
    const TimeSymbol b0 = fixed_point_solve(a0, F, N);
    return eps.map([&](const PolyhomSymbol& e, size_t i) { return (e + b0.at(i)).rebased(1.0, N); });
}

namespace detail {
/// Replaces the block P X P by the square root of P A P.
inline Matrix regularize_low_band(const Matrix& X, const Matrix& A, const Matrix& P) {
    // square root taken on the range of P; the null directions would otherwise pick up sqrt(round-off)
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) m += es.eigenvalues()[i] > 0.5;
    const Matrix W = es.eigenvectors().rightCols(m);
    Matrix Ar = W.adjoint() * A * W;
    Ar = 0.5 * (Ar + Ar.adjoint()).eval();
    return X - P * X * P + W * sqrt_psd(Ar) * W.adjoint();
}

inline Matrix model_matrix(const ModelCoefficients& mc, double t) {
    const auto s = mc.at(t);
    return diff_op_matrix(mc.grid(), s.a11, s.b1, s.m);
}

/// Lagrange interpolation of node matrices at time t using the nearest points.
inline Matrix interpolate_nodes(const std::vector<Matrix>& M, const std::vector<double>& nodes, double t, int points) {
    const int n = int(nodes.size());
    const int w = std::min(points, n);
    const double dt = nodes[1] - nodes[0];
    int first = int(std::floor((t - nodes[0]) / dt)) - (w / 2 - 1);
    first = std::clamp(first, 0, n - w);
    Matrix out = Matrix::Zero(M[0].rows(), M[0].cols());
    for (int i = first; i < first + w; ++i) {
        double l = 1.0;
        for (int j = first; j < first + w; ++j)
            if (j != i) l *= (t - nodes[j]) / (nodes[i] - nodes[j]);
        if (l != 0.0) out += l * M[i];
    }
    return out;
}

/// u(t_j) for ∂ₜu = G(t)u, u(0) = 1, by 4th-order Magnus with `sub` substeps per interval.
inline std::vector<Matrix> magnus_propagate(const std::vector<Matrix>& G, const std::vector<double>& nodes, int sub,
                                            int points) {
    const Eigen::Index n = G[0].rows();
    std::vector<Matrix> out{Matrix::Identity(n, n)};
    Matrix u = out[0];
    const double c1 = 0.5 - std::sqrt(3.0) / 6, c2 = 0.5 + std::sqrt(3.0) / 6;
    for (size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double h = (nodes[j + 1] - nodes[j]) / sub;
        for (int s = 0; s < sub; ++s) {
            const double t0 = nodes[j] + s * h;
            const Matrix A1 = interpolate_nodes(G, nodes, t0 + c1 * h, points);
            const Matrix A2 = interpolate_nodes(G, nodes, t0 + c2 * h, points);
            const Matrix Omega = 0.5 * h * (A1 + A2) + (std::sqrt(3.0) / 12.0 * h * h) * (A2 * A1 - A1 * A2);
            u = Omega.exp() * u;
        }
        out.push_back(u);
    }
    return out;
}

/// Step halving with Richardson extrapolation: the symmetric Magnus-4 error expands in h⁴, h⁶, …,
/// so (16 u_{2m} − u_m)/15 is 6th order and |u_{2m} − u_m|/15 bounds the error of u_{2m}.
inline std::vector<Matrix> propagate_refined(const std::vector<Matrix>& G, const std::vector<double>& nodes,
                                             const ParametrixOptions& opt, PropagatorRecord& rec) {
    int sub = 1;
    auto prev = magnus_propagate(G, nodes, sub, opt.interpolation_points);
    for (int level = 0; level < opt.max_refinements; ++level) {
        sub *= 2;
        auto next = magnus_propagate(G, nodes, sub, opt.interpolation_points);
        double change = 0;
        for (size_t j = 0; j < nodes.size(); ++j)
            change = std::max(change, relative_deviation(next[j], prev[j]));
        rec = {sub, change / 15.0};
        if (rec.change < opt.propagator_tol) {
            for (size_t j = 0; j < nodes.size(); ++j) next[j] += (next[j] - prev[j]) / 15.0;
            return next;
        }
        prev = std::move(next);
    }
    throw ParametrixError("propagator did not converge under step refinement, last change " +
                          std::to_string(rec.change));
}
}  // namespace detail

/// Quantized b at every node with the low band replaced by the square root of the model operator.
[[nodiscard]] inline std::vector<Matrix> quantize_b(const ModelCoefficients& mc, const TimeSymbol& b,
                                                    double low_band) {
    const Matrix P = low_band_projector(mc.grid(), low_band);
    std::vector<Matrix> out;
    for (size_t i = 0; i < b.size(); ++i) {
        if (!mc.time_dependent() && i > 0) {
            out.push_back(out.front());
            continue;
        }
        const Matrix Bq = quantize(b.at(i)).entries;
        out.push_back(detail::regularize_low_band(Bq, detail::model_matrix(mc, b.nodes()[i]), P));
    }
    return out;
}

[[nodiscard]] inline Matrix quantize_epsilon(const ModelCoefficients& mc, const PolyhomSymbol& eps, double t,
                                             double low_band) {
    const Matrix P = low_band_projector(mc.grid(), low_band);
    const Matrix E = hermitize(quantize(eps)).entries;
    return hermitize({mc.grid(), detail::regularize_low_band(E, detail::model_matrix(mc, t), P)}, 1e-9).entries;
}

struct RBuild {
    Matrix r;
    double radius = 0;
    double eigmin = 0, eigmax = 0;
};

/// r = Op(b†^{(−1)}) with the low-band correction r − ½E^{-1/2}P s P E^{-1/2}, s = E^{1/2}(r+r†)E^{1/2} − 2,
/// doubling the radius until E^{1/2}(r+r†)E^{1/2} has eigmin above the floor.
[[nodiscard]] inline RBuild build_r(const PolyhomSymbol& b0, const Matrix& E, int N, double radius, double max_radius,
                                    double floor) {
    const SpatialGrid& g = b0.grid();
    const Matrix r0 = quantize(asymptotic_inverse(adjoint_symbol(b0), N)).entries;
    const Matrix Eh = sqrt_psd(E);
    const Matrix Ehi = inv_sqrt_pd(E, "quantized epsilon");
    const Matrix M = Eh * (r0 + r0.adjoint()) * Eh;
    const Matrix s = M - 2.0 * Matrix::Identity(g.size(), g.size());
    double lo = 0, hi = 0;
    for (double R = radius;; R *= 2) {
        const Matrix P = low_band_projector(g, R);
        const Matrix r = r0 - 0.5 * Ehi * P * s * P * Ehi;
        const RealVector ev = hermitian_eigenvalues(Eh * (r + r.adjoint()) * Eh);
        lo = ev.minCoeff();
        hi = ev.maxCoeff();
        if (lo >= floor) return {r, R, lo, hi};
        if (R * 2 > max_radius)
            throw ParametrixError("r + r† not positive up to radius " + std::to_string(R) + ": spectrum [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

/// T(r) = Z[[1, r],[1, −r†]], T(r)⁻¹ = [[r†, r],[1, −1]]Z with Z = (r + r†)^{-1/2}.
[[nodiscard]] inline std::pair<BlockOperator, BlockOperator> build_T(const SpatialGrid& g, const Matrix& r) {
    const Matrix Z = inv_sqrt_pd(r + r.adjoint(), "r + r†");
    const BlockOperator T = BlockOperator::from_blocks(g, Z, Z * r, Z, -Z * r.adjoint());
    const BlockOperator Ti = BlockOperator::from_blocks(g, r.adjoint() * Z, r * Z, Z, -Z);
    return {T, Ti};
}

/// d₊ = (1 + (B†)⁻¹B)⁻¹ = (B + B†)⁻¹B†, d₋ = (1 + B⁻¹B†)⁻¹ = (B + B†)⁻¹B.
[[nodiscard]] inline std::pair<Matrix, Matrix> build_d(const Matrix& B) {
    Eigen::PartialPivLU<Matrix> lu(B + B.adjoint());
    return {lu.solve(Matrix(B.adjoint())), lu.solve(B)};
}

/// u₊ with ∂ₜu₊ = iBu₊ and u₋ with ∂ₜu₋ = −iB†u₋ at the nodes, from the stored B(t_j).
/// Static models use powers of the one-step exponential.
inline void compute_propagators(ParametrixBundle& P, const ParametrixOptions& opt) {
    const Complex I(0, 1);
    const auto& nodes = P.nodes;
    P.u_plus.clear();
    P.u_minus.clear();
    if (P.static_model && opt.static_shortcut) {
        const double dt = nodes[1] - nodes[0];
        const Matrix step_p = (I * dt * P.B[0]).exp(), step_m = (-I * dt * P.B[0].adjoint()).exp();
        Matrix up = Matrix::Identity(P.grid.size(), P.grid.size()), um = up;
        for (size_t j = 0; j < nodes.size(); ++j) {
            if (j > 0) {
                up = step_p * up;
                um = step_m * um;
            }
            P.u_plus.push_back(up);
            P.u_minus.push_back(um);
        }
        P.plus_record = P.minus_record = {1, 0.0};
        return;
    }
    std::vector<Matrix> Gp, Gm;
    for (const auto& Bj : P.B) {
        Gp.push_back(I * Bj);
        Gm.push_back(-I * Bj.adjoint());
    }
    P.u_plus = detail::propagate_refined(Gp, nodes, opt, P.plus_record);
    P.u_minus = detail::propagate_refined(Gm, nodes, opt, P.minus_record);
}

[[nodiscard]] inline ParametrixBundle build_parametrix(const ModelCoefficients& mc, const ParametrixOptions& opt = {}) {
    const SpatialGrid& g = mc.grid();
    const int N = opt.truncation;
    if (N < 1) throw std::invalid_argument("truncation must be at least 1");
    const auto nodes = uniform_nodes(opt.t_max, opt.nodes);
    const bool shortcut = opt.static_shortcut && !mc.time_dependent();

    TimeSymbol eps = build_epsilon(mc, nodes, N, opt.stencil_order);
    TimeSymbol b = shortcut ? eps : build_b(eps, N);
    std::vector<Matrix> B = quantize_b(mc, b, opt.low_band);
    const Matrix E = quantize_epsilon(mc, eps.at(0), 0.0, opt.low_band);

    const double max_r = opt.max_r_cutoff > 0 ? opt.max_r_cutoff : g.unit() * g.size() / 8;
    RBuild rb = build_r(b.at(0), E, N, opt.r_cutoff, max_r, opt.positivity_floor);
    auto [dp, dm] = build_d(B[0]);
    auto [T, Ti] = build_T(g, rb.r);

    ParametrixBundle out{g, nodes, N, rb.radius, opt.low_band, !mc.time_dependent(), eps, b, B, E, rb.r, dp, dm,
                         {}, {}, T, Ti, {}, {}, rb.eigmin, rb.eigmax};
    compute_propagators(out, opt);
    return out;
}

/// U(t_j,0)f and i⁻¹∂ₜU(t_j,0)f at node j.
[[nodiscard]] inline CauchyData assemble_U(const ParametrixBundle& P, const CauchyData& f, size_t node) {
    const Vector plus = P.u_plus.at(node) * (P.d_plus * (f.f0 + P.r * f.f1));
    const Vector minus = P.u_minus.at(node) * (P.d_minus * (f.f0 - P.r.adjoint() * f.f1));
    return {plus + minus, P.B[node] * plus - P.B[node].adjoint() * minus};
}

/// Splitting along C⁺(r) = {f₀ = r†f₁} and C⁻(r) = {f₀ = −r f₁}.
[[nodiscard]] inline std::pair<CauchyData, CauchyData> split_data(const ParametrixBundle& P, const CauchyData& f) {
    Eigen::PartialPivLU<Matrix> lu(P.r + P.r.adjoint());
    const Vector y = lu.solve(Vector(f.f0 + P.r * f.f1));
    CauchyData plus{P.r.adjoint() * y, y};
    CauchyData minus{f.f0 - plus.f0, f.f1 - plus.f1};
    return {plus, minus};
}

/// Defects of the initial conditions as operators on (f₀, f₁):
/// U(0)f − f₀ = (d₊+d₋−1)f₀ + (d₊r − d₋r†)f₁,  i⁻¹∂ₜU(0)f − f₁ = (Bd₊ − B†d₋)f₀ + (Bd₊r + B†d₋r† − 1)f₁.
struct InitialDefects {
    Matrix value_f0, value_f1, velocity_f0, velocity_f1;
};

[[nodiscard]] inline InitialDefects initial_defects(const ParametrixBundle& P) {
    const Eigen::Index n = P.grid.size();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix& B = P.B[0];
    return {P.d_plus + P.d_minus - I, P.d_plus * P.r - P.d_minus * P.r.adjoint(), B * P.d_plus - B.adjoint() * P.d_minus,
            B * P.d_plus * P.r + B.adjoint() * P.d_minus * P.r.adjoint() - I};
}

/// (∂ₜ² + A(t))U(t,0)f at node j, with ∂ₜ²u₊ = (iḂ − B²)u₊, ∂ₜ²u₋ = (−iḂ† − B†²)u₋ and Ḃ by finite differences.
[[nodiscard]] inline Vector pde_residual(const ParametrixBundle& P, const ModelCoefficients& mc, const CauchyData& f,
                                         size_t node) {
    const Complex I(0, 1);
    const TimeSymbol& ts = P.epsilon;
    auto [first, w] = ts.stencil(node);
    Matrix Bdot = Matrix::Zero(P.grid.size(), P.grid.size());
    for (size_t s = 0; s < w.size(); ++s) Bdot += w[s] * P.B[first + s];
    const Matrix& B = P.B[node];
    const Vector plus = P.u_plus.at(node) * (P.d_plus * (f.f0 + P.r * f.f1));
    const Vector minus = P.u_minus.at(node) * (P.d_minus * (f.f0 - P.r.adjoint() * f.f1));
    const auto s = mc.at(P.nodes[node]);
    Vector out = I * (Bdot * plus) - B * (B * plus) - I * (Bdot.adjoint() * minus) -
                 B.adjoint() * (B.adjoint() * minus);
    out += apply_model_operator(P.grid, s, plus + minus);
    return out;
}

/// Lower bound c in E ≥ c⟨D⟩: eigmin of ⟨D⟩^{-1/2} E ⟨D⟩^{-1/2}.
[[nodiscard]] inline double epsilon_ellipticity(const SpatialGrid& g, const Matrix& E) {
    Matrix W = Matrix::Zero(g.size(), g.size());
    for (int i = 0; i < g.size(); ++i) W(i, i) = std::pow(1.0 + std::pow(g.wavenumber(i), 2), -0.25);
    const Matrix Ehat = to_fourier_basis(E);
    return eigmin(W * Ehat * W);
}

}  // namespace hadamard
