#pragma once

#include "quantize.hpp"

#include <array>
#include <functional>
#include <random>

namespace hadamard {

using ScalarField = std::function<double(double t, double x)>;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// g = −c dt² + h dx² with potentials (V, A) and scalar ρ.
struct MetricData {
    ScalarField c = [](double, double) { return 1.0; };
    ScalarField h = [](double, double) { return 1.0; };
    ScalarField V = [](double, double) { return 0.0; };
    ScalarField A = [](double, double) { return 0.0; };
    ScalarField rho = [](double, double) { return 1.0; };
    bool time_dependent = true;
};

/// Coefficients of −∂a¹¹∂ + b¹∂ − ∂b̄¹ + m sampled at one time.
struct CoefficientSample {
    RealVector a11;
    Vector b1;
    RealVector m;
    RealVector conformal;    // c^{-1/4} h^{1/4}
    RealVector gauge_phase;  // ∫₀ᵗ V
};

class ModelCoefficients {
public:
    using Sampler = std::function<CoefficientSample(double t)>;

    ModelCoefficients(SpatialGrid g, Sampler sampler, ScalarField principal, bool time_dependent)
        : grid_(g), sampler_(std::move(sampler)), principal_(std::move(principal)), time_dependent_(time_dependent) {}

    [[nodiscard]] const SpatialGrid& grid() const { return grid_; }
    [[nodiscard]] bool time_dependent() const { return time_dependent_; }
    [[nodiscard]] CoefficientSample at(double t) const {
        auto s = sampler_(time_dependent_ ? t : 0.0);
        s.a11 = denoise(s.a11);
        s.b1 = denoise(s.b1);
        s.m = denoise(s.m);
        if (s.a11.minCoeff() <= 0.0)
            throw GeometryError("a11 not positive at t = " + std::to_string(t));
        return s;
    }
    /// a¹¹(t,x) at an arbitrary point.
    [[nodiscard]] double principal(double t, double x) const { return principal_(time_dependent_ ? t : 0.0, x); }

    [[nodiscard]] PolyhomSymbol symbol(double t) const {
        const auto s = at(t);
        return weyl_symbol_of_diff_op(grid_, s.a11, s.b1, s.m);
    }

private:
    SpatialGrid grid_;
    Sampler sampler_;
    ScalarField principal_;
    bool time_dependent_;
};

namespace detail {
inline RealVector sample(const SpatialGrid& g, const ScalarField& f, double t) {
    RealVector v(g.size());
    for (int j = 0; j < g.size(); ++j) v[j] = f(t, g.node(j));
    return v;
}

/// d^order/dt^order f(t) by a central 9-point stencil of spacing dt.
template <class F>
auto time_derivative(F&& f, double t, int order, double dt = 0.02) {
    static const std::array<double, 9> d1{1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0, 4.0 / 5, -1.0 / 5, 4.0 / 105,
                                          -1.0 / 280};
    static const std::array<double, 9> d2{-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72,
                                          8.0 / 5,    -1.0 / 5,  8.0 / 315, -1.0 / 560};
    const auto& w = order == 1 ? d1 : d2;
    auto acc = f(t);
    acc.setZero();
    for (int i = 0; i < 9; ++i)
        if (w[i] != 0.0) acc += w[i] * f(t + (i - 4) * dt);
    return (acc / std::pow(dt, order)).eval();
}

/// Gauss–Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = n * (z * p1 - p0) / (z * z - 1.0);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

inline double integrate_time(const ScalarField& f, double t, double x, int order = 24) {
    if (t == 0.0) return 0.0;
    static const auto gl = gauss_legendre(order);
    double s = 0;
    for (int i = 0; i < order; ++i) s += gl.second[i] * f(0.5 * t * (gl.first[i] + 1.0), x);
    return 0.5 * t * s;
}
}  // namespace detail

struct HypothesisReport {
    double min_c = 0, min_h = 0;
    bool ok = false;
};

/// Positive lower bounds of c and h on the sampled window.
[[nodiscard]] inline HypothesisReport check_hypotheses(const MetricData& M, const SpatialGrid& g,
                                                       const std::vector<double>& times) {
    HypothesisReport r{1e300, 1e300, false};
    for (double t : times) {
        r.min_c = std::min(r.min_c, detail::sample(g, M.c, t).minCoeff());
        r.min_h = std::min(r.min_h, detail::sample(g, M.h, t).minCoeff());
    }
    r.ok = r.min_c > 0 && r.min_h > 0;
    return r;
}

/// Reduction of the metric Klein–Gordon operator to ∂ₜ² + a(t,x,D), with
/// w = c^{1/4}h^{-1/4}, p = c^{1/2}h^{-1/2}, Ã = A − ∂ₓF:
/// a¹¹ = c/h, b¹ = p w w' − iÃ a¹¹, m = p(w'² + Ã²w²) + cρ − β⁻¹∂ₜ²β, β = c^{-1/4}h^{1/4}.
[[nodiscard]] inline ModelCoefficients reduce_to_model(const MetricData& M, const SpatialGrid& g,
                                                       const std::vector<double>& check_times = {0.0, 0.5, 1.0}) {
    const auto hyp = check_hypotheses(M, g, check_times);
    if (!hyp.ok)
        throw GeometryError("metric hypotheses violated: min c = " + std::to_string(hyp.min_c) +
                            ", min h = " + std::to_string(hyp.min_h));
    auto sampler = [M, g](double t) {
        const RealVector c = detail::sample(g, M.c, t), h = detail::sample(g, M.h, t);
        const RealVector A = detail::sample(g, M.A, t), rho = detail::sample(g, M.rho, t);
        if (c.minCoeff() <= 0 || h.minCoeff() <= 0)
            throw GeometryError("metric hypotheses violated at t = " + std::to_string(t));
        RealVector F(g.size());
        for (int j = 0; j < g.size(); ++j) F[j] = detail::integrate_time(M.V, t, g.node(j));
        const RealVector At = A - spectral_derivative(g, F.cast<Complex>(), 1).real();
        const RealVector w = (c.array().pow(0.25) * h.array().pow(-0.25)).matrix();
        const RealVector p = (c.array().sqrt() / h.array().sqrt()).matrix();
        const RealVector wx = spectral_derivative(g, w.cast<Complex>(), 1).real();
        auto beta = [&](double s) {
            RealVector v(g.size());
            for (int j = 0; j < g.size(); ++j)
                v[j] = std::pow(M.c(s, g.node(j)), -0.25) * std::pow(M.h(s, g.node(j)), 0.25);
            return v;
        };
        const RealVector b = beta(t);
        const RealVector btt = M.time_dependent ? detail::time_derivative(beta, t, 2) : RealVector::Zero(g.size());
        CoefficientSample s;
        s.a11 = (c.array() / h.array()).matrix();
        s.b1 = Vector(g.size());
        for (int j = 0; j < g.size(); ++j) s.b1[j] = Complex(p[j] * w[j] * wx[j], -At[j] * s.a11[j]);
        s.m = (p.array() * (wx.array().square() + At.array().square() * w.array().square()) + c.array() * rho.array() -
               btt.array() / b.array())
                  .matrix();
        s.conformal = b;
        s.gauge_phase = F;
        return s;
    };
    ScalarField principal = [M](double t, double x) { return M.c(t, x) / M.h(t, x); };
    // a static metric with V ≠ 0 still gives time-dependent coefficients through F = tV
    const bool gauge_time = detail::sample(g, M.V, 0.0).cwiseAbs().maxCoeff() > 0.0;
    return {g, sampler, principal, M.time_dependent || gauge_time};
}

/// Model given directly by a¹¹, Re b¹, Im b¹, m.
[[nodiscard]] inline ModelCoefficients model_from_coefficients(const SpatialGrid& g, ScalarField a11, ScalarField b1_re,
                                                               ScalarField b1_im, ScalarField m, bool time_dependent) {
    auto sampler = [=](double t) {
        CoefficientSample s;
        s.a11 = detail::sample(g, a11, t);
        const RealVector re = detail::sample(g, b1_re, t), im = detail::sample(g, b1_im, t);
        s.b1 = Vector(g.size());
        for (int j = 0; j < g.size(); ++j) s.b1[j] = Complex(re[j], im[j]);
        s.m = detail::sample(g, m, t);
        s.conformal = RealVector::Ones(g.size());
        s.gauge_phase = RealVector::Zero(g.size());
        return s;
    };
    return {g, sampler, a11, time_dependent};
}

/// Applies −∂a∂ + b∂ − ∂b̄ + m to φ with spectral derivatives.
[[nodiscard]] inline Vector apply_model_operator(const SpatialGrid& g, const CoefficientSample& s, const Vector& phi) {
    const Vector dphi = spectral_derivative(g, phi, 1);
    Vector out = -spectral_derivative(g, (s.a11.cast<Complex>().array() * dphi.array()).matrix(), 1);
    out += (s.b1.array() * dphi.array()).matrix();
    out -= spectral_derivative(g, (s.b1.conjugate().array() * phi.array()).matrix(), 1);
    out += (s.m.cast<Complex>().array() * phi.array()).matrix();
    return out;
}

/// Seeded test battery for identity checks: band-limited functions across low and mid bands.
[[nodiscard]] inline std::vector<Vector> test_battery(const SpatialGrid& g, std::uint64_t seed, int count = 8) {
    std::mt19937_64 rng(seed);
    std::vector<Vector> out;
    const int bands[] = {1, 2, 3, 4, 6, 8, 12, 16};
    for (int i = 0; i < count; ++i) {
        int K = bands[i % 8];
        while (2 * K - 1 >= g.size() / 4) K /= 2;
        out.push_back(band_limited_random(g, std::max(K, 1), rng));
    }
    return out;
}

/// Relative residual of P φ = J β e^{−iF}(∂ₜ² + a)β e^{iF} φ, J = c^{-1/2}h^{-1/2},
/// for φ(t,x) = e^{iωt}ψ(x), evaluated at time t. Both sides are assembled independently.
[[nodiscard]] inline double factorization_residual(const MetricData& M, const ModelCoefficients& mc, double t,
                                                   const Vector& psi, double omega) {
    const SpatialGrid& g = mc.grid();
    const Complex I(0, 1);
    const Vector phi = std::exp(I * omega * t) * psi;
    const RealVector c = detail::sample(g, M.c, t), h = detail::sample(g, M.h, t);
    const RealVector V = detail::sample(g, M.V, t), A = detail::sample(g, M.A, t), rho = detail::sample(g, M.rho, t);
    const RealVector J = (c.array() * h.array()).rsqrt().matrix();
    auto sigma = [&](double s) {
        RealVector v(g.size());
        for (int j = 0; j < g.size(); ++j) v[j] = std::sqrt(M.h(s, g.node(j)) / M.c(s, g.node(j)));
        return v;
    };
    auto Vf = [&](double s) { return detail::sample(g, M.V, s); };
    const RealVector sg = sigma(t);
    const RealVector sgt = M.time_dependent ? detail::time_derivative(sigma, t, 1) : RealVector::Zero(g.size());
    const RealVector Vt = M.time_dependent ? detail::time_derivative(Vf, t, 1) : RealVector::Zero(g.size());

    // left side: J(∂ₜ + iV)σ(∂ₜ + iV)φ − J(∂ₓ + iA)(c^{1/2}h^{-1/2})(∂ₓ + iA)φ + ρφ
    Vector lhs(g.size());
    for (int j = 0; j < g.size(); ++j) {
        const double w = omega + V[j];
        lhs[j] = J[j] * (I * sgt[j] * w + I * sg[j] * Vt[j] - sg[j] * w * w) * phi[j];
    }
    const Vector Aphi = (A.cast<Complex>().array() * phi.array()).matrix();
    Vector inner_field = spectral_derivative(g, phi, 1) + I * Aphi;
    inner_field = ((c.array().sqrt() / h.array().sqrt()).cast<Complex>() * inner_field.array()).matrix();
    const Vector outer = spectral_derivative(g, inner_field, 1) +
                         I * (A.cast<Complex>().array() * inner_field.array()).matrix();
    lhs -= (J.cast<Complex>().array() * outer.array()).matrix();
    lhs += (rho.cast<Complex>().array() * phi.array()).matrix();

    // right side with Θ = β e^{i(F+ωt)} ψ
    const auto s = mc.at(t);
    auto beta = [&](double u) {
        RealVector v(g.size());
        for (int j = 0; j < g.size(); ++j) v[j] = std::pow(M.c(u, g.node(j)), -0.25) * std::pow(M.h(u, g.node(j)), 0.25);
        return v;
    };
    const RealVector b = beta(t);
    const RealVector bt = M.time_dependent ? detail::time_derivative(beta, t, 1) : RealVector::Zero(g.size());
    const RealVector btt = M.time_dependent ? detail::time_derivative(beta, t, 2) : RealVector::Zero(g.size());
    Vector theta(g.size()), theta_tt(g.size());
    for (int j = 0; j < g.size(); ++j) {
        const Complex e = std::exp(I * (s.gauge_phase[j] + omega * t));
        const double Ph = V[j] + omega;
        theta[j] = b[j] * e * psi[j];
        theta_tt[j] = (btt[j] + 2.0 * I * bt[j] * Ph + I * b[j] * Vt[j] - b[j] * Ph * Ph) * e * psi[j];
    }
    const Vector inner_rhs = theta_tt + apply_model_operator(g, s, theta);
    Vector rhs(g.size());
    for (int j = 0; j < g.size(); ++j) rhs[j] = J[j] * b[j] * std::exp(-I * s.gauge_phase[j]) * inner_rhs[j];
    return l2_norm(g, lhs - rhs) / std::max(l2_norm(g, lhs), 1e-300);
}

/// max over the battery of e^{−iF}∂ₜ(e^{iF}φ) vs (∂ₜ + iV)φ for φ = e^{iωt}ψ.
[[nodiscard]] inline double gauge_identity_residual(const MetricData& M, const ModelCoefficients& mc, double t,
                                                    const std::vector<Vector>& battery, double omega = 3.0) {
    const SpatialGrid& g = mc.grid();
    const Complex I(0, 1);
    auto Fs = [&](double s) { return mc.at(s).gauge_phase; };
    const RealVector F = Fs(t);
    const RealVector Ft = detail::time_derivative(Fs, t, 1);
    const RealVector V = detail::sample(g, M.V, t);
    double worst = 0;
    for (const auto& psi : battery) {
        Vector lhs(g.size()), rhs(g.size());
        for (int j = 0; j < g.size(); ++j) {
            const Complex phi = std::exp(I * omega * t) * psi[j];
            lhs[j] = std::exp(-I * F[j]) * (I * (Ft[j] + omega)) * std::exp(I * F[j]) * phi;
            rhs[j] = I * (omega + V[j]) * phi;
        }
        worst = std::max(worst, l2_norm(g, lhs - rhs) / l2_norm(g, rhs));
    }
    return worst;
}

struct PhasePoint {
    double x = 0, k = 1;
};

struct FlowOptions {
    double tol = 1e-12;
    double k_min = 1e-6;
    double fd_step = 1e-3;
};

namespace detail {
inline double principal_speed(const ModelCoefficients& mc, double t, double x) {
    return std::sqrt(mc.principal(t, x));
}
inline double principal_speed_dx(const ModelCoefficients& mc, double t, double x, double h) {
    auto f = [&](double y) { return principal_speed(mc, t, y); };
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}
}  // namespace detail

/// Flow of H = sign·√a¹¹(t,x)|k| from t0 to t1 (adaptive RK4 with step doubling).
/// The convention H = −ε₁ corresponds to sign = −1.
[[nodiscard]] inline PhasePoint hamiltonian_flow(int sign, double t1, double t0, PhasePoint p,
                                                 const ModelCoefficients& mc, const FlowOptions& opt = {}) {
    if (std::abs(p.k) < opt.k_min) throw GeometryError("phase point too close to the zero section");
    if (t1 == t0) return p;
    const double s = sign >= 0 ? 1.0 : -1.0;
    auto rhs = [&](double t, const std::array<double, 2>& y) {
        const double xdot = s * detail::principal_speed(mc, t, y[0]) * (y[1] >= 0 ? 1.0 : -1.0);
        const double kdot = -s * detail::principal_speed_dx(mc, t, y[0], opt.fd_step) * std::abs(y[1]);
        return std::array<double, 2>{xdot, kdot};
    };
    auto rk4 = [&](double t, const std::array<double, 2>& y, double h) {
        auto add = [](std::array<double, 2> a, const std::array<double, 2>& b, double f) {
            a[0] += f * b[0];
            a[1] += f * b[1];
            return a;
        };
        const auto k1 = rhs(t, y);
        const auto k2 = rhs(t + h / 2, add(y, k1, h / 2));
        const auto k3 = rhs(t + h / 2, add(y, k2, h / 2));
        const auto k4 = rhs(t + h, add(y, k3, h));
        return std::array<double, 2>{y[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                                     y[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
    };
    std::array<double, 2> y{p.x, p.k};
    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t = t0, h = dir * std::min(0.05, std::abs(t1 - t0));
    int guard = 0;
    while (dir * (t1 - t) > 1e-15) {
        if (++guard > 1000000) throw GeometryError("flow integration did not finish");
        if (dir * (t + h - t1) > 0) h = t1 - t;
        const auto full = rk4(t, y, h);
        const auto half = rk4(t + h / 2, rk4(t, y, h / 2), h / 2);
        const double scale = std::max(1.0, std::abs(y[1]));
        const double err = std::max(std::abs(full[0] - half[0]), std::abs(full[1] - half[1]) / scale) / 15.0;
        if (err <= opt.tol || std::abs(h) < 1e-10) {
            t += h;
            y = half;
            if (std::abs(y[1]) < opt.k_min) throw GeometryError("trajectory reached |k| < k_min");
            if (err < opt.tol / 64) h *= 2;
        } else {
            h /= 2;
        }
    }
    return {y[0], y[1]};
}

/// Jacobian of the flow map by central differences.
[[nodiscard]] inline Eigen::Matrix2d flow_jacobian(int sign, double t1, double t0, PhasePoint p,
                                                   const ModelCoefficients& mc, double step = 1e-5,
                                                   const FlowOptions& opt = {}) {
    Eigen::Matrix2d J;
    const double hx = step, hk = step * std::max(1.0, std::abs(p.k));
    auto f = [&](double dx, double dk) { return hamiltonian_flow(sign, t1, t0, {p.x + dx, p.k + dk}, mc, opt); };
    const auto xp = f(hx, 0), xm = f(-hx, 0), kp = f(0, hk), km = f(0, -hk);
    J << (xp.x - xm.x) / (2 * hx), (kp.x - km.x) / (2 * hk), (xp.k - xm.k) / (2 * hx), (kp.k - km.k) / (2 * hk);
    return J;
}

}  // namespace hadamard
