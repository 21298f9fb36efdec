#pragma once

#include "parametrix.hpp"
#include "quantize.hpp"

namespace hadamard {

/// Coherent packet centred at (x₀, k₀) with width k₀^{-1/2}; k₀ must be a grid wavenumber.
[[nodiscard]] inline Vector wave_packet(const SpatialGrid& g, PhasePoint p) {
    const double sigma = 1.0 / std::sqrt(std::abs(p.k));
    Vector v(g.size());
    for (int j = 0; j < g.size(); ++j) {
        const double d = std::remainder(g.node(j) - p.x, g.length());
        v[j] = std::exp(-d * d / (2 * sigma * sigma)) * std::exp(Complex(0, p.k * g.node(j)));
    }
    return v / l2_norm(g, v);
}

/// ⟨ψ|Cψ⟩ for the normalized packet at p.
[[nodiscard]] inline Complex packet_symbol(const SpatialGrid& g, const Matrix& C, PhasePoint p) {
    const Vector v = wave_packet(g, p);
    return inner(g, v, Vector(C * v));
}

struct EgorovSample {
    double k0 = 0;
    double deviation = 0;  // max |extracted − transported| / max |a|
};

struct EgorovReport {
    int sign = 0;                      // flow sign that was used for transport
    std::vector<EgorovSample> samples;  // one per packet frequency
    [[nodiscard]] double ratio() const {
        if (samples.size() < 2 || samples.back().deviation == 0.0) return 0.0;
        return samples[samples.size() - 2].deviation / samples.back().deviation;
    }
};

/// Conjugates Op(a) by the forward propagator u₊ between node 0 and `node`,
/// C = u₊(t)Op(a)u₊(t)⁻¹, and compares packet expectations at (x₀, ±k₀) with a transported along the
/// flow of sign·ε₁ from t back to 0.
[[nodiscard]] inline EgorovReport egorov_check(const PolyhomSymbol& a, const ParametrixBundle& P,
                                               const ModelCoefficients& mc, size_t node, int sign,
                                               const std::vector<int>& packet_modes, int positions = 6) {
    const SpatialGrid& g = P.grid;
    for (int m : packet_modes)
        if (m <= 0 || m > g.size() / 8) throw std::invalid_argument("packet mode outside the resolved band");
    const Matrix& u = P.u_plus.at(node);
    const Matrix C = u * quantize(a).entries * Eigen::PartialPivLU<Matrix>(u).inverse();
    const double t = P.nodes.at(node);
    EgorovReport rep{sign, {}};
    for (int m : packet_modes) {
        const double k0 = m * g.unit();
        double worst = 0.0, scale = 0.0;
        for (int i = 0; i < positions; ++i)
            for (double dir : {1.0, -1.0}) {
                const PhasePoint p{g.length() * (i + 0.25) / positions, dir * k0};
                const PhasePoint back = hamiltonian_flow(sign, 0.0, t, p, mc);
                const Complex predicted = a.eval_at(back.x, back.k);
                const Complex measured = packet_symbol(g, C, p);
                worst = std::max(worst, std::abs(measured - predicted));
                scale = std::max(scale, std::abs(predicted));
            }
        rep.samples.push_back({k0, worst / std::max(scale, 1e-300)});
    }
    return rep;
}

}  // namespace hadamard
