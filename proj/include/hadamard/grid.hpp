#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <algorithm>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hadamard {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class SpatialGrid {
public:
    explicit SpatialGrid(int n = 256, double length = kTwoPi) : n_(n), length_(length) {
        if (n < 8 || n % 2 != 0) throw std::invalid_argument("grid size must be even and at least 8");
        if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("grid length must be positive");
    }

    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] double length() const { return length_; }
    [[nodiscard]] double spacing() const { return length_ / n_; }
    [[nodiscard]] double unit() const { return kTwoPi / length_; }
    [[nodiscard]] double node(int j) const { return j * spacing(); }

    /// Signed mode number m of an FFT-ordered index, in [-n/2, n/2).
    [[nodiscard]] int mode(int index) const { return index < n_ / 2 ? index : index - n_; }
    [[nodiscard]] int index_of(int mode) const { return ((mode % n_) + n_) % n_; }
    [[nodiscard]] double wavenumber(int index) const { return unit() * mode(index); }
    [[nodiscard]] bool is_nyquist(int index) const { return index == n_ / 2; }

    [[nodiscard]] RealVector nodes() const {
        RealVector x(n_);
        for (int j = 0; j < n_; ++j) x[j] = node(j);
        return x;
    }

    bool operator==(const SpatialGrid& o) const { return n_ == o.n_ && length_ == o.length_; }

private:
    int n_;
    double length_;
};

inline void require_same(const SpatialGrid& a, const SpatialGrid& b) {
    if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

inline void require_size(const SpatialGrid& g, Eigen::Index len) {
    if (len != g.size())
        throw std::invalid_argument("size mismatch: expected " + std::to_string(g.size()) + ", got " +
                                    std::to_string(len));
}

struct GridFunction {
    SpatialGrid grid;
    Vector values;

    GridFunction(SpatialGrid g, Vector v) : grid(g), values(std::move(v)) { require_size(grid, values.size()); }
    explicit GridFunction(SpatialGrid g) : grid(g), values(Vector::Zero(g.size())) {}
};

struct GridOperator {
    SpatialGrid grid;
    Matrix entries;

    GridOperator(SpatialGrid g, Matrix m) : grid(g), entries(std::move(m)) {
        require_size(grid, entries.rows());
        require_size(grid, entries.cols());
    }

    [[nodiscard]] GridOperator adjoint() const { return {grid, entries.adjoint()}; }
    [[nodiscard]] static GridOperator identity(const SpatialGrid& g) {
        return {g, Matrix::Identity(g.size(), g.size())};
    }
};

namespace detail {
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;
    return engine;
}
}  // namespace detail

/// Unitary DFT: c_m = n^{-1/2} Σ_j f_j e^{-i k_m x_j}, FFT index order.
[[nodiscard]] inline Vector fourier(const Vector& f) {
    std::vector<Complex> in(f.data(), f.data() + f.size()), out;
    detail::fft_engine().fwd(out, in);
    Vector c(f.size());
    const double s = 1.0 / std::sqrt(static_cast<double>(f.size()));
    for (Eigen::Index i = 0; i < f.size(); ++i) c[i] = out[i] * s;
    return c;
}

[[nodiscard]] inline Vector inverse_fourier(const Vector& c) {
    std::vector<Complex> in(c.data(), c.data() + c.size()), out;
    detail::fft_engine().inv(out, in);  // includes the 1/n factor
    Vector f(c.size());
    const double s = std::sqrt(static_cast<double>(c.size()));
    for (Eigen::Index i = 0; i < c.size(); ++i) f[i] = out[i] * s;
    return f;
}

[[nodiscard]] inline GridFunction fourier(const GridFunction& f) { return {f.grid, fourier(f.values)}; }
[[nodiscard]] inline GridFunction inverse_fourier(const GridFunction& c) {
    return {c.grid, inverse_fourier(c.values)};
}

namespace detail {
/// Drops round-off level Fourier modes, which differentiation would amplify by |k|^d.
/// For smooth (symbol coefficient) input the top quarter of the spectrum is taken to be
/// round-off and its largest entry raises the cut.
inline Vector denoised_fourier(const Vector& f, bool smooth = false) {
    Vector c = fourier(f);
    const Eigen::Index n = c.size();
    double cut = 1e-14 * c.cwiseAbs().maxCoeff();
    if (smooth)
        for (Eigen::Index i = 3 * n / 8; i <= 5 * n / 8; ++i) cut = std::max(cut, 4.0 * std::abs(c[i]));
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(c[i]) <= cut) c[i] = 0.0;
    return c;
}

inline Vector differentiate_modes(const SpatialGrid& g, const Vector& c, int order) {
    Vector cd = c;
    for (int i = 0; i < g.size(); ++i) {
        if (g.is_nyquist(i) && order % 2 == 1) cd[i] = 0.0;
        else cd[i] *= std::pow(Complex(0.0, g.wavenumber(i)), order);
    }
    return inverse_fourier(cd);
}
}  // namespace detail

/// ∂ₓ^order applied spectrally. The Nyquist mode is dropped for odd orders and
/// round-off level modes are discarded before differentiating.
[[nodiscard]] inline Vector spectral_derivative(const SpatialGrid& g, const Vector& f, int order) {
    require_size(g, f.size());
    if (order < 0) throw std::invalid_argument("derivative order must be nonnegative");
    if (order == 0) return f;
    return detail::differentiate_modes(g, detail::denoised_fourier(f), order);
}

[[nodiscard]] inline GridFunction spectral_derivative(const GridFunction& f, int order) {
    if (order < 1) throw std::invalid_argument("derivative order must be at least 1");
    return {f.grid, spectral_derivative(f.grid, f.values, order)};
}

/// Derivatives 0..max_order of a smooth coefficient f, spectrally.
[[nodiscard]] inline std::vector<Vector> derivative_table(const SpatialGrid& g, const Vector& f, int max_order) {
    std::vector<Vector> out{f};
    const Vector c = detail::denoised_fourier(f, true);
    for (int d = 1; d <= max_order; ++d) out.push_back(detail::differentiate_modes(g, c, d));
    return out;
}

/// Smooth coefficient f with round-off level Fourier modes removed.
[[nodiscard]] inline Vector denoise(const Vector& f) { return inverse_fourier(detail::denoised_fourier(f, true)); }
[[nodiscard]] inline RealVector denoise(const RealVector& f) { return denoise(Vector(f.cast<Complex>())).real(); }

/// Trigonometric interpolant of grid samples; the Nyquist mode is split symmetrically.
class TrigInterpolant {
public:
    TrigInterpolant(const SpatialGrid& g, const Vector& f) : grid_(g), coef_(fourier(f) / std::sqrt(double(g.size()))) {}

    [[nodiscard]] Complex operator()(double x) const { return derivative(x, 0); }

    [[nodiscard]] Complex derivative(double x, int order) const {
        Complex s = 0.0;
        const int n = grid_.size();
        for (int i = 0; i < n; ++i) {
            const double k = grid_.wavenumber(i);
            if (grid_.is_nyquist(i)) {
                const double kn = grid_.unit() * (n / 2);
                const Complex a = std::pow(Complex(0, kn), order) * std::exp(Complex(0, kn * x));
                const Complex b = std::pow(Complex(0, -kn), order) * std::exp(Complex(0, -kn * x));
                s += coef_[i] * 0.5 * (a + b);
            } else {
                s += coef_[i] * std::pow(Complex(0, k), order) * std::exp(Complex(0, k * x));
            }
        }
        return s;
    }

private:
    SpatialGrid grid_;
    Vector coef_;
};

/// Discrete L² pairing ⟨u,v⟩ = dx Σ ū v.
[[nodiscard]] inline Complex inner(const SpatialGrid& g, const Vector& u, const Vector& v) {
    return g.spacing() * u.dot(v);
}
[[nodiscard]] inline double l2_norm(const SpatialGrid& g, const Vector& u) {
    return std::sqrt(g.spacing()) * u.norm();
}

/// Unitary DFT matrix F with (F f) = fourier(f).
[[nodiscard]] inline Matrix fourier_matrix(const SpatialGrid& g) {
    const int n = g.size();
    Matrix F(n, n);
    const double s = 1.0 / std::sqrt(double(n));
    for (int q = 0; q < n; ++q)
        for (int j = 0; j < n; ++j) F(q, j) = s * std::exp(Complex(0, -kTwoPi * double(q) * j / n));
    return F;
}

/// Â = F A F† computed with FFTs along both axes.
[[nodiscard]] inline Matrix to_fourier_basis(const Matrix& A) {
    Matrix tmp(A.rows(), A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) tmp.col(j) = fourier(Vector(A.col(j)));
    // right multiplication by F† equals conj(F conj(row)^T)^T
    Matrix out(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        Vector row = tmp.row(i).transpose().conjugate();
        out.row(i) = fourier(row).conjugate().transpose();
    }
    return out;
}

/// A = F† Â F.
[[nodiscard]] inline Matrix to_position_basis(const Matrix& Ahat) {
    Matrix tmp(Ahat.rows(), Ahat.cols());
    for (Eigen::Index j = 0; j < Ahat.cols(); ++j) tmp.col(j) = inverse_fourier(Vector(Ahat.col(j)));
    Matrix out(Ahat.rows(), Ahat.cols());
    for (Eigen::Index i = 0; i < Ahat.rows(); ++i) {
        Vector row = tmp.row(i).transpose().conjugate();
        out.row(i) = inverse_fourier(row).conjugate().transpose();
    }
    return out;
}

/// Spectral D = i⁻¹∂ₓ as a matrix, Nyquist dropped.
[[nodiscard]] inline Matrix derivative_matrix(const SpatialGrid& g) {
    Matrix Dhat = Matrix::Zero(g.size(), g.size());
    for (int i = 0; i < g.size(); ++i)
        if (!g.is_nyquist(i)) Dhat(i, i) = g.wavenumber(i);
    return to_position_basis(Dhat);
}

/// Orthogonal projector onto Fourier modes with |k| ≤ radius (in wavenumber units).
[[nodiscard]] inline Matrix low_band_projector(const SpatialGrid& g, double radius) {
    Matrix P = Matrix::Zero(g.size(), g.size());
    for (int i = 0; i < g.size(); ++i)
        if (std::abs(g.wavenumber(i)) <= radius + 1e-12) P(i, i) = 1.0;
    return to_position_basis(P);
}

/// Random function with Fourier support on modes K ≤ |m| < 2K, unit L² norm.
[[nodiscard]] inline Vector band_limited_random(const SpatialGrid& g, int band, std::mt19937_64& rng) {
    if (band < 1 || 2 * band - 1 >= g.size() / 2)
        throw std::invalid_argument("band " + std::to_string(band) + " not resolved on grid");
    std::normal_distribution<double> normal;
    Vector c = Vector::Zero(g.size());
    for (int m = band; m < 2 * band; ++m) {
        c[g.index_of(m)] = Complex(normal(rng), normal(rng));
        c[g.index_of(-m)] = Complex(normal(rng), normal(rng));
    }
    Vector f = inverse_fourier(c);
    return f / l2_norm(g, f);
}

/// Random function with Fourier support on modes |m| ≤ kmax.
[[nodiscard]] inline Vector low_mode_random(const SpatialGrid& g, int kmax, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vector c = Vector::Zero(g.size());
    for (int m = -kmax; m <= kmax; ++m) c[g.index_of(m)] = Complex(normal(rng), normal(rng));
    Vector f = inverse_fourier(c);
    return f / l2_norm(g, f);
}

struct DecayOptions {
    std::vector<double> bands{8, 16, 32, 64};
    int guard = -1;         // modes excluded near Nyquist; -1 means n/8
    double floor = 1e-11;   // values at or below are treated as exact zeros
};

struct DecayReport {
    std::vector<double> bands;
    std::vector<double> sup;
    double slope = 0.0;
    double residual = 0.0;
    int fitted_points = 0;

    [[nodiscard]] bool negligible() const { return slope == -std::numeric_limits<double>::infinity(); }
    [[nodiscard]] bool passes(double threshold) const { return negligible() || slope <= threshold; }
};

namespace detail {
inline void fit_loglog(DecayReport& r, double floor) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < r.bands.size(); ++i)
        if (r.sup[i] > floor) {
            lx.push_back(std::log(r.bands[i]));
            ly.push_back(std::log(r.sup[i]));
        }
    r.fitted_points = int(lx.size());
    if (lx.size() < 2) {
        r.slope = -std::numeric_limits<double>::infinity();
        r.residual = 0.0;
        return;
    }
    const double m = double(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    r.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double icpt = (sy - r.slope * sx) / m;
    double res = 0;
    for (size_t i = 0; i < lx.size(); ++i) res += std::pow(ly[i] - icpt - r.slope * lx[i], 2);
    r.residual = std::sqrt(res / m);
}

inline void check_bands(const SpatialGrid& g, const DecayOptions& opt, int guard) {
    if (opt.bands.empty()) throw std::invalid_argument("no diagnostic bands");
    for (size_t i = 1; i < opt.bands.size(); ++i)
        if (!(opt.bands[i] > opt.bands[i - 1])) throw std::invalid_argument("bands must be strictly increasing");
    if (opt.bands.back() > g.size() / 2 - guard)
        throw std::invalid_argument("largest band exceeds n/2 minus guard");
}
}  // namespace detail

/// S(K) = max |Â_{qq'}| over K ≤ max(|m|,|m'|) ≤ n/2 − guard, on a Fourier-basis matrix.
[[nodiscard]] inline DecayReport decay_from_fourier(const SpatialGrid& g, const Matrix& Ahat,
                                                    const DecayOptions& opt = {}) {
    const int guard = opt.guard < 0 ? g.size() / 8 : opt.guard;
    detail::check_bands(g, opt, guard);
    const int limit = g.size() / 2 - guard;
    // max over entries grouped by max(|m|,|m'|)
    std::vector<double> by_level(g.size() / 2 + 1, 0.0);
    for (int q = 0; q < g.size(); ++q)
        for (int p = 0; p < g.size(); ++p) {
            const int lvl = std::max(std::abs(g.mode(q)), std::abs(g.mode(p)));
            by_level[lvl] = std::max(by_level[lvl], std::abs(Ahat(q, p)));
        }
    DecayReport r;
    r.bands = opt.bands;
    for (double K : opt.bands) {
        double s = 0;
        for (int lvl = int(std::ceil(K - 1e-9)); lvl <= limit; ++lvl) s = std::max(s, by_level[lvl]);
        r.sup.push_back(s);
    }
    detail::fit_loglog(r, opt.floor);
    return r;
}

[[nodiscard]] inline DecayReport smoothing_decay_diagnostic(const GridOperator& A, const DecayOptions& opt = {}) {
    return decay_from_fourier(A.grid, to_fourier_basis(A.entries), opt);
}

/// Decay of ‖M f_K‖/‖f_K‖ over data bands K for a map given as a callable on vectors.
template <class Map>
[[nodiscard]] DecayReport action_decay(const SpatialGrid& g, Map&& map, const std::vector<double>& bands,
                                       int samples, std::mt19937_64& rng, double floor = 1e-11) {
    DecayReport r;
    r.bands = bands;
    for (double K : bands) {
        double worst = 0;
        for (int s = 0; s < samples; ++s) {
            Vector f = band_limited_random(g, int(K), rng);
            worst = std::max(worst, l2_norm(g, map(f)) / l2_norm(g, f));
        }
        r.sup.push_back(worst);
    }
    detail::fit_loglog(r, floor);
    return r;
}

}  // namespace hadamard
