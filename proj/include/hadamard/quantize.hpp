#pragma once

#include "symbol.hpp"

namespace hadamard {

/// Weyl quantization in the Fourier basis:
/// Â(q,q') = Σ_components ĉ_branch(q−q') w(ξ), ξ = (k_q + k_q')/2,
/// where ĉ(p) = n⁻¹ Σ_j c(x_j) e^{−i k_p x_j} and w(ξ) = |ξ|^s (times the cutoff).
[[nodiscard]] inline Matrix quantize_fourier(const PolyhomSymbol& a) {
    const SpatialGrid& g = a.grid();
    const int n = g.size();
    Matrix A = Matrix::Zero(n, n);
    const double u = g.unit();
    for (const auto& c : a.components()) {
        const Vector cp = fourier(c.plus) / std::sqrt(double(n));
        const Vector cm = fourier(c.minus) / std::sqrt(double(n));
        // weights indexed by m_q + m_q' + n
        std::vector<double> w(2 * n + 1);
        for (int s = 0; s <= 2 * n; ++s) w[s] = detail::radial(c.degree, 0.5 * u * (s - n), c.polynomial);
        for (int q = 0; q < n; ++q) {
            const int mq = g.mode(q);
            for (int p = 0; p < n; ++p) {
                const int mp = g.mode(p);
                const int s = mq + mp + n;
                if (w[s] == 0.0) continue;
                const int d = g.index_of(mq - mp);
                A(q, p) += (s >= n ? cp[d] : cm[d]) * w[s];
            }
        }
    }
    return A;
}

[[nodiscard]] inline GridOperator quantize(const PolyhomSymbol& a) {
    return {a.grid(), to_position_basis(quantize_fourier(a))};
}

struct QuantizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// (A + A†)/2, refusing inputs whose anti-Hermitian part exceeds tol relative to ‖A‖.
[[nodiscard]] inline GridOperator hermitize(const GridOperator& A, double tol = 1e-10) {
    const double scale = std::max(1.0, A.entries.cwiseAbs().maxCoeff());
    const double asym = (A.entries - A.entries.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
        throw QuantizationError("hermitize: asymmetry " + std::to_string(asym) + " above tolerance");
    return {A.grid, 0.5 * (A.entries + A.entries.adjoint())};
}

/// Weyl symbol of −∂a∂ + b∂ − ∂b̄ + m (with ∂ = iD):
/// a k² + (¼a'' − (Re b)' + m) − 2 (Im b) k, stored as exact polynomial components.
[[nodiscard]] inline PolyhomSymbol weyl_symbol_of_diff_op(const SpatialGrid& g, const RealVector& a11,
                                                          const Vector& b1, const RealVector& m) {
    require_size(g, a11.size());
    require_size(g, b1.size());
    require_size(g, m.size());
    if (a11.minCoeff() <= 0.0)
        throw SymbolError("principal coefficient must be positive, min = " + std::to_string(a11.minCoeff()));
    const Vector a = a11.cast<Complex>();
    const Vector re_b = b1.real().cast<Complex>();
    const Vector im_b = b1.imag().cast<Complex>();
    PolyhomSymbol s(g, 2.0, PolyhomSymbol::kExact);
    s.add(2.0, a, a, true);
    const Vector v = -2.0 * im_b;
    s.add(1.0, v, -v, true);
    const Vector zeroth = (0.25 * spectral_derivative(g, a, 2) - spectral_derivative(g, re_b, 1) + m.cast<Complex>())
                              .real()
                              .cast<Complex>();
    s.add(0.0, zeroth, zeroth, true);
    return s;
}

/// Direct matrix of −∂a∂ + b∂ − ∂b̄ + m = D a D + i(b D − D b̄) + m with spectral D.
[[nodiscard]] inline Matrix diff_op_matrix(const SpatialGrid& g, const RealVector& a11, const Vector& b1,
                                           const RealVector& m) {
    const Matrix D = derivative_matrix(g);
    const Complex I(0, 1);
    Matrix A = D * a11.cast<Complex>().asDiagonal() * D;
    A += I * (b1.asDiagonal() * D - D * b1.conjugate().asDiagonal());
    A += m.cast<Complex>().asDiagonal();
    return A;
}

}  // namespace hadamard
