#pragma once

#include "geometry.hpp"
#include "parametrix.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

namespace hadamard {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OracleOptions {
    double tol = 1e-10;     // relative change between step halvings, after the order-8 Richardson factor
    int initial_substeps = 2;
    int max_halvings = 6;
    int nyquist_guard = -1;  // -1: n/8 modes
    double band_energy_ratio = 1e-24;  // allowed energy fraction inside the guard
};

/// φ(t_j) and ∂ₜφ(t_j) for one datum.
struct DirectSolution {
    SpatialGrid grid;
    std::vector<double> nodes;
    std::vector<Vector> phi;
    std::vector<Vector> dphi;
    double achieved = 0.0;  // error estimate from the last halving
    int substeps = 0;       // steps per node interval

    /// Cauchy data (φ, i⁻¹∂ₜφ) at node j.
    [[nodiscard]] CauchyData cauchy(size_t j) const { return {phi.at(j), Complex(0, -1) * dphi.at(j)}; }
};

namespace detail {
/// Rejects data with Fourier content in the top `guard` modes below Nyquist.
inline void require_band_limited(const SpatialGrid& g, const Vector& f, int guard, double ratio) {
    const Vector c = fourier(f);
    double inside = 0.0, outside = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        const double a = std::norm(c[i]);
        (std::abs(g.mode(i)) >= g.size() / 2 - guard ? outside : inside) += a;
    }
    if (outside > ratio * std::max(inside, 1e-300))
        throw OracleError("Cauchy data not band-limited below the Nyquist guard");
}

/// Integrates φ'' = −A(t)φ for all data columns at once with `sub` fixed steps per node interval.
inline std::vector<Matrix> integrate_block(const ModelCoefficients& mc, const Matrix& phi0, const Matrix& dphi0,
                                           const std::vector<double>& nodes, int sub) {
    namespace odeint = boost::numeric::odeint;
    const SpatialGrid& g = mc.grid();
    const Eigen::Index n = g.size(), k = phi0.cols();
    using State = std::vector<double>;
    State x(size_t(4 * n * k));
    auto as_complex = [n, k](State& s) { return Eigen::Map<Matrix>(reinterpret_cast<Complex*>(s.data()), 2 * n, k); };
    auto X = as_complex(x);
    X.topRows(n) = phi0;
    X.bottomRows(n) = dphi0;
    std::optional<CoefficientSample> frozen;
    if (!mc.time_dependent()) frozen = mc.at(0.0);
    auto rhs = [&](const State& y, State& dy, double t) {
        const auto Y = Eigen::Map<const Matrix>(reinterpret_cast<const Complex*>(y.data()), 2 * n, k);
        auto DY = Eigen::Map<Matrix>(reinterpret_cast<Complex*>(dy.data()), 2 * n, k);
        const CoefficientSample s = frozen ? *frozen : mc.at(t);
        DY.topRows(n) = Y.bottomRows(n);
        for (Eigen::Index c = 0; c < k; ++c) DY.col(c).tail(n) = -apply_model_operator(g, s, Y.col(c).head(n));
    };
    odeint::runge_kutta_fehlberg78<State> stepper;
    std::vector<Matrix> out{as_complex(x)};
    for (size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double h = (nodes[j + 1] - nodes[j]) / sub;
        for (int s = 0; s < sub; ++s) stepper.do_step(rhs, x, nodes[j] + s * h, h);
        out.push_back(as_complex(x));
    }
    return out;
}
}  // namespace detail

/// Direct solution of ∂ₜ²φ + A(t)φ = 0 with φ(0) = f₀, i⁻¹∂ₜφ(0) = f₁, for each datum, by
/// fixed-step Runge–Kutta–Fehlberg 7(8) with step halving until the node values settle.
[[nodiscard]] inline std::vector<DirectSolution> solve_cauchy_direct(const ModelCoefficients& mc,
                                                                     const std::vector<CauchyData>& data,
                                                                     const std::vector<double>& nodes,
                                                                     const OracleOptions& opt = {}) {
    const SpatialGrid& g = mc.grid();
    if (data.empty()) return {};
    if (nodes.size() < 2) throw OracleError("need at least two time nodes");
    const int guard = opt.nyquist_guard < 0 ? g.size() / 8 : opt.nyquist_guard;
    const Eigen::Index n = g.size(), k = Eigen::Index(data.size());
    Matrix phi0(n, k), dphi0(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        require_size(g, data[c].f0.size());
        detail::require_band_limited(g, data[c].f0, guard, opt.band_energy_ratio);
        detail::require_band_limited(g, data[c].f1, guard, opt.band_energy_ratio);
        phi0.col(c) = data[c].f0;
        dphi0.col(c) = Complex(0, 1) * data[c].f1;
    }
    int sub = opt.initial_substeps;
    auto prev = detail::integrate_block(mc, phi0, dphi0, nodes, sub);
    for (int level = 0; level < opt.max_halvings; ++level) {
        sub *= 2;
        auto next = detail::integrate_block(mc, phi0, dphi0, nodes, sub);
        double change = 0.0;
        for (size_t j = 0; j < nodes.size(); ++j)
            for (Eigen::Index c = 0; c < k; ++c) {
                const double scale = std::max(next[j].col(c).norm(), 1e-300);
                change = std::max(change, (next[j].col(c) - prev[j].col(c)).norm() / scale);
            }
        const double estimate = change / 255.0;
        if (estimate < opt.tol) {
            std::vector<DirectSolution> out;
            for (Eigen::Index c = 0; c < k; ++c) {
                DirectSolution s{g, nodes, {}, {}, estimate, sub};
                for (const auto& m : next) {
                    s.phi.push_back(m.col(c).head(n));
                    s.dphi.push_back(m.col(c).tail(n));
                }
                out.push_back(std::move(s));
            }
            return out;
        }
        prev = std::move(next);
    }
    throw OracleError("direct solver did not converge under step halving");
}

[[nodiscard]] inline DirectSolution solve_cauchy_direct(const ModelCoefficients& mc, const CauchyData& f,
                                                        const std::vector<double>& nodes,
                                                        const OracleOptions& opt = {}) {
    return solve_cauchy_direct(mc, std::vector<CauchyData>{f}, nodes, opt).front();
}

/// ∫ (∂ₜφ₁)‾φ₂ − φ̄₁∂ₜφ₂ dx at node j.
[[nodiscard]] inline Complex symplectic_form(const DirectSolution& a, const DirectSolution& b, size_t j) {
    if (a.nodes != b.nodes) throw OracleError("solutions must share time nodes");
    return inner(a.grid, a.dphi.at(j), b.phi.at(j)) - inner(a.grid, a.phi.at(j), b.dphi.at(j));
}

/// ⟨∂ₜφ|∂ₜφ⟩ + ⟨φ|Aφ⟩ at node j.
[[nodiscard]] inline double energy(const ModelCoefficients& mc, const DirectSolution& s, size_t j) {
    const auto c = mc.at(s.nodes.at(j));
    return std::real(inner(s.grid, s.dphi[j], s.dphi[j]) +
                     inner(s.grid, s.phi[j], apply_model_operator(s.grid, c, s.phi[j])));
}

/// Residual ‖φ'' + Aφ‖/‖Aφ‖ at the interior node j, with φ'' from a 5-point stencil on ∂ₜφ.
[[nodiscard]] inline double direct_residual(const ModelCoefficients& mc, const DirectSolution& s, size_t j) {
    if (j < 2 || j + 2 >= s.nodes.size()) throw OracleError("residual needs two nodes on each side");
    const double h = s.nodes[j + 1] - s.nodes[j];
    const Vector acc = (s.dphi[j - 2] - 8.0 * s.dphi[j - 1] + 8.0 * s.dphi[j + 1] - s.dphi[j + 2]) / (12.0 * h);
    const Vector Aphi = apply_model_operator(s.grid, mc.at(s.nodes[j]), s.phi[j]);
    return l2_norm(s.grid, acc + Aphi) / std::max(l2_norm(s.grid, Aphi), 1e-300);
}

/// Fraction of the Hann-windowed temporal spectrum of φ(·, x), summed over x, on the positive
/// (sign = +1) or negative (sign = −1) frequency half-axis. A component e^{iωt} with ω > 0 counts as
/// positive. The zero and Nyquist bins are split evenly.
[[nodiscard]] inline double frequency_sign_fraction(const DirectSolution& s, int sign) {
    const int M = int(s.nodes.size());
    if (M < 32) throw OracleError("frequency measurement needs at least 32 time nodes");
    if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
    const int n = s.grid.size();
    Eigen::FFT<double> fft;
    std::vector<Complex> series(M), spec;
    double pos = 0.0, neg = 0.0;
    for (int x = 0; x < n; ++x) {
        for (int j = 0; j < M; ++j) {
            const double w = 0.5 - 0.5 * std::cos(kTwoPi * j / (M - 1));
            series[j] = w * s.phi[j][x];
        }
        // forward transform Σ φ_j e^{−2πi jm/M}, so e^{+iωt} lands on m > 0
        fft.fwd(spec, series);
        for (int m = 0; m < M; ++m) {
            const double p = std::norm(spec[m]);
            if (m == 0 || (M % 2 == 0 && m == M / 2)) {
                pos += 0.5 * p;
                neg += 0.5 * p;
            } else if (m < (M + 1) / 2) {
                pos += p;
            } else {
                neg += p;
            }
        }
    }
    const double total = pos + neg;
    if (total <= 0.0) return 0.0;
    return (sign > 0 ? pos : neg) / total;
}

}  // namespace hadamard
