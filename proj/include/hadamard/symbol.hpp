#pragma once

#include "grid.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>

namespace hadamard {

/// Smoothstep of degree 7: 0 for u ≤ 0, 1 for u ≥ 1, C³ in between.
[[nodiscard]] inline double smoothstep7(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double u4 = u * u * u * u;
    return u4 * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u * u * u);
}

/// Low-frequency cutoff: 0 on |k| ≤ 1, 1 on |k| ≥ 2.
[[nodiscard]] inline double symbol_cutoff(double k) { return smoothstep7(std::abs(k) - 1.0); }

struct SymbolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// c₊(x)|k|^s for k > 0 and c₋(x)|k|^s for k < 0. Polynomial components
/// are exact polynomials in k and are evaluated without the cutoff.
struct HomogeneousComponent {
    double degree = 0.0;
    Vector plus;
    Vector minus;
    bool polynomial = false;
};

namespace detail {
inline constexpr double kDegreeTol = 1e-9;

inline bool same_degree(double a, double b) { return std::abs(a - b) < kDegreeTol; }

/// s(s−1)…(s−i+1)
inline double falling(double s, int i) {
    double r = 1.0;
    for (int j = 0; j < i; ++j) r *= (s - j);
    return r;
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

inline double factorial(int n) {
    double r = 1.0;
    for (int j = 2; j <= n; ++j) r *= j;
    return r;
}

/// value of |k|^s with the branch and cutoff convention
inline double radial(double s, double k, bool polynomial) {
    if (polynomial) return std::pow(std::abs(k), s);
    const double chi = symbol_cutoff(k);
    return chi == 0.0 ? 0.0 : chi * std::pow(std::abs(k), s);
}
}  // namespace detail

class PolyhomSymbol {
public:
    /// Depth used for exactly known symbols (finite polynomials in k).
    static constexpr int kExact = 1 << 20;

    PolyhomSymbol(SpatialGrid grid, double top_order, int depth)
        : grid_(grid), top_(top_order), depth_(depth) {
        if (depth < 0) throw std::invalid_argument("symbol depth must be nonnegative");
    }

    [[nodiscard]] const SpatialGrid& grid() const { return grid_; }
    [[nodiscard]] double top_order() const { return top_; }
    [[nodiscard]] int depth() const { return depth_; }
    [[nodiscard]] bool exact() const { return depth_ >= kExact / 2; }
    /// Lowest degree that is still reliable.
    [[nodiscard]] double lowest_degree() const { return top_ - depth_; }
    [[nodiscard]] const std::vector<HomogeneousComponent>& components() const { return comps_; }

    /// Adds a component, merging with an existing one of equal degree and kind.
    /// Components below the reliable range are dropped; above the top order is an error.
    void add(const HomogeneousComponent& c) {
        require_size(grid_, c.plus.size());
        require_size(grid_, c.minus.size());
        if (c.degree > top_ + detail::kDegreeTol)
            throw SymbolError("component of degree " + std::to_string(c.degree) + " above top order " +
                              std::to_string(top_));
        if (c.degree < lowest_degree() - detail::kDegreeTol) return;
        if (std::abs(std::round(top_ - c.degree) - (top_ - c.degree)) > detail::kDegreeTol)
            throw SymbolError("component degree not an integer step below top order");
        for (auto& e : comps_)
            if (detail::same_degree(e.degree, c.degree) && e.polynomial == c.polynomial) {
                e.plus += c.plus;
                e.minus += c.minus;
                return;
            }
        comps_.push_back(c);
        std::sort(comps_.begin(), comps_.end(), [](const auto& a, const auto& b) {
            return a.degree > b.degree + detail::kDegreeTol ||
                   (detail::same_degree(a.degree, b.degree) && a.polynomial && !b.polynomial);
        });
    }

    void add(double degree, Vector plus, Vector minus, bool polynomial = false) {
        add(HomogeneousComponent{degree, std::move(plus), std::move(minus), polynomial});
    }

    /// Combined (plus, minus) coefficients of all components at a degree.
    [[nodiscard]] std::pair<Vector, Vector> coefficient(double degree) const {
        Vector p = Vector::Zero(grid_.size()), m = Vector::Zero(grid_.size());
        for (const auto& c : comps_)
            if (detail::same_degree(c.degree, degree)) {
                p += c.plus;
                m += c.minus;
            }
        return {p, m};
    }

    [[nodiscard]] HomogeneousComponent principal() const {
        auto [p, m] = coefficient(top_);
        return {top_, p, m, false};
    }

    /// Value at grid node j and frequency k.
    [[nodiscard]] Complex eval(int node, double k) const {
        Complex s = 0.0;
        for (const auto& c : comps_) {
            const double w = detail::radial(c.degree, k, c.polynomial);
            if (w == 0.0) continue;
            s += (k >= 0 ? c.plus[node] : c.minus[node]) * w;
        }
        return s;
    }

    /// Value at arbitrary x via trigonometric interpolation of the coefficients.
    [[nodiscard]] Complex eval_at(double x, double k) const {
        Complex s = 0.0;
        for (const auto& c : comps_) {
            const double w = detail::radial(c.degree, k, c.polynomial);
            if (w == 0.0) continue;
            s += TrigInterpolant(grid_, k >= 0 ? c.plus : c.minus)(x) * w;
        }
        return s;
    }

    /// Copy with a new bookkeeping range; components outside it are dropped.
    [[nodiscard]] PolyhomSymbol rebased(double top, int depth) const {
        PolyhomSymbol r(grid_, top, depth);
        for (const auto& c : comps_)
            if (c.degree <= top + detail::kDegreeTol) r.add(c);
        return r;
    }

    [[nodiscard]] PolyhomSymbol truncated(int depth) const { return rebased(top_, std::min(depth, depth_)); }

    [[nodiscard]] double max_abs_imag() const {
        double m = 0;
        for (const auto& c : comps_)
            m = std::max({m, c.plus.imag().cwiseAbs().maxCoeff(), c.minus.imag().cwiseAbs().maxCoeff()});
        return m;
    }

    [[nodiscard]] double max_abs_coefficient() const {
        double m = 0;
        for (const auto& c : comps_) m = std::max({m, c.plus.cwiseAbs().maxCoeff(), c.minus.cwiseAbs().maxCoeff()});
        return m;
    }

    /// Strips round-off level Fourier modes from every coefficient.
    void denoise_coefficients() {
        for (auto& c : comps_) {
            c.plus = denoise(c.plus);
            c.minus = denoise(c.minus);
        }
    }

    PolyhomSymbol& operator*=(Complex s) {
        for (auto& c : comps_) {
            c.plus *= s;
            c.minus *= s;
        }
        return *this;
    }

    /// Sum with bookkeeping: top is the larger top, reliability the weaker of the two.
    [[nodiscard]] friend PolyhomSymbol combine(const PolyhomSymbol& a, Complex sa, const PolyhomSymbol& b, Complex sb) {
        require_same(a.grid_, b.grid_);
        const double top = std::max(a.top_, b.top_);
        const double low = std::max(a.lowest_degree(), b.lowest_degree());
        const int depth = (a.exact() && b.exact()) ? kExact : int(std::lround(top - low));
        PolyhomSymbol r(a.grid_, top, depth);
        for (auto c : a.comps_) {
            c.plus *= sa;
            c.minus *= sa;
            r.add(c);
        }
        for (auto c : b.comps_) {
            c.plus *= sb;
            c.minus *= sb;
            r.add(c);
        }
        return r;
    }

    friend PolyhomSymbol operator+(const PolyhomSymbol& a, const PolyhomSymbol& b) { return combine(a, 1.0, b, 1.0); }
    friend PolyhomSymbol operator-(const PolyhomSymbol& a, const PolyhomSymbol& b) { return combine(a, 1.0, b, -1.0); }
    friend PolyhomSymbol operator*(Complex s, PolyhomSymbol a) { return a *= s; }

private:
    SpatialGrid grid_;
    double top_;
    int depth_;
    std::vector<HomogeneousComponent> comps_;
};

/// Multiplication symbol v(x), exact.
[[nodiscard]] inline PolyhomSymbol function_symbol(const SpatialGrid& g, const Vector& v) {
    PolyhomSymbol s(g, 0.0, PolyhomSymbol::kExact);
    s.add(0.0, v, v, true);
    return s;
}

[[nodiscard]] inline PolyhomSymbol constant_symbol(const SpatialGrid& g, Complex c) {
    return function_symbol(g, Vector::Constant(g.size(), c));
}

/// c(x)|k|^s as a (non-polynomial) homogeneous symbol with the given depth.
[[nodiscard]] inline PolyhomSymbol homogeneous_symbol(const SpatialGrid& g, double s, const Vector& plus,
                                                      const Vector& minus, int depth = PolyhomSymbol::kExact) {
    PolyhomSymbol a(g, s, depth);
    a.add(s, plus, minus, false);
    return a;
}

[[nodiscard]] inline PolyhomSymbol adjoint_symbol(const PolyhomSymbol& a) {
    PolyhomSymbol r(a.grid(), a.top_order(), a.depth());
    for (auto c : a.components()) {
        c.plus = c.plus.conjugate();
        c.minus = c.minus.conjugate();
        r.add(c);
    }
    return r;
}

enum class MoyalTerms { all, odd, even };

namespace detail {

struct DerivedComponent {
    const HomogeneousComponent* c;
    std::vector<Vector> dplus, dminus;  // x-derivatives
};

inline std::vector<DerivedComponent> derive_all(const PolyhomSymbol& a, int max_order) {
    std::vector<DerivedComponent> out;
    for (const auto& c : a.components()) {
        out.push_back({&c, derivative_table(a.grid(), c.plus, max_order),
                       derivative_table(a.grid(), c.minus, max_order)});
    }
    return out;
}

/// Raw Moyal expansion of a#b keeping every term of degree ≥ lowest.
/// a#b = Σ_n (i/2)^n/n! Σ_j C(n,j)(−1)^{n−j} (∂ₓ^j ∂ₖ^{n−j} a)(∂ₖ^j ∂ₓ^{n−j} b)
inline PolyhomSymbol moyal_expand(const PolyhomSymbol& a, const PolyhomSymbol& b, double lowest, double top,
                                  int depth, MoyalTerms terms) {
    require_same(a.grid(), b.grid());
    PolyhomSymbol r(a.grid(), top, depth);
    int max_n = 0;
    for (const auto& ca : a.components())
        for (const auto& cb : b.components()) {
            const bool poly = ca.polynomial && cb.polynomial;
            if (!poly && lowest < -1e8) throw SymbolError("exact Moyal product needs polynomial symbols");
            const double span = poly ? std::min(ca.degree + cb.degree, ca.degree + cb.degree - lowest)
                                     : ca.degree + cb.degree - lowest;
            max_n = std::max(max_n, int(std::floor(span + kDegreeTol)));
        }
    const auto da = derive_all(a, max_n);
    const auto db = derive_all(b, max_n);
    for (const auto& A : da)
        for (const auto& B : db) {
            const HomogeneousComponent& ca = *A.c;
            const HomogeneousComponent& cb = *B.c;
            const bool poly = ca.polynomial && cb.polynomial;
            for (int n = 0; n <= max_n; ++n) {
                const double deg = ca.degree + cb.degree - n;
                if (deg < lowest - kDegreeTol) break;
                if (terms == MoyalTerms::odd && n % 2 == 0) continue;
                if (terms == MoyalTerms::even && n % 2 == 1) continue;
                const Complex pref = std::pow(Complex(0, 0.5), n) / factorial(n);
                Vector plus = Vector::Zero(a.grid().size()), minus = Vector::Zero(a.grid().size());
                bool any = false;
                for (int j = 0; j <= n; ++j) {
                    const int ka = n - j, kb = j;
                    const double fa = falling(ca.degree, ka), fb = falling(cb.degree, kb);
                    if (fa == 0.0 || fb == 0.0) continue;
                    const double sa = (ka % 2 == 0) ? 1.0 : -1.0, sb = (kb % 2 == 0) ? 1.0 : -1.0;
                    const Complex coef = pref * binomial(n, j) * ((n - j) % 2 == 0 ? 1.0 : -1.0) * fa * fb;
                    plus += coef * A.dplus[j].cwiseProduct(B.dplus[n - j]);
                    minus += (coef * sa * sb) * A.dminus[j].cwiseProduct(B.dminus[n - j]);
                    any = true;
                }
                if (any) r.add(deg, plus, minus, poly);
                if (poly && n >= ca.degree + cb.degree - kDegreeTol) break;
            }
        }
    return r;
}

inline void require_elliptic(const HomogeneousComponent& p, const std::string& what) {
    const double scale = std::max({1.0, p.plus.cwiseAbs().maxCoeff(), p.minus.cwiseAbs().maxCoeff()});
    const double mp = p.plus.cwiseAbs().minCoeff(), mm = p.minus.cwiseAbs().minCoeff();
    if (mp <= 1e-10 * scale)
        throw SymbolError(what + ": principal symbol degenerate on branch k>0, min |principal| = " +
                          std::to_string(mp));
    if (mm <= 1e-10 * scale)
        throw SymbolError(what + ": principal symbol degenerate on branch k<0, min |principal| = " +
                          std::to_string(mm));
}
}  // namespace detail

/// a#b with N expansion terms. The result's depth never exceeds what the inputs support.
[[nodiscard]] inline PolyhomSymbol moyal_product(const PolyhomSymbol& a, const PolyhomSymbol& b, int N) {
    const double top = a.top_order() + b.top_order();
    double low = top - N;
    if (!a.exact()) low = std::max(low, a.lowest_degree() + b.top_order());
    if (!b.exact()) low = std::max(low, a.top_order() + b.lowest_degree());
    const bool exact = a.exact() && b.exact() && N >= PolyhomSymbol::kExact / 2;
    const int depth = exact ? PolyhomSymbol::kExact : int(std::lround(top - low));
    const double raw_low = exact ? -1e9 : low;
    return detail::moyal_expand(a, b, raw_low, top, depth, MoyalTerms::all);
}

/// [a,b]_# = a#b − b#a: only odd expansion terms survive, doubled.
[[nodiscard]] inline PolyhomSymbol moyal_commutator(const PolyhomSymbol& a, const PolyhomSymbol& b, int N) {
    const double top = a.top_order() + b.top_order() - 1;
    double low = top - N;
    if (!a.exact()) low = std::max(low, a.lowest_degree() + b.top_order() - 1);
    if (!b.exact()) low = std::max(low, a.top_order() + b.lowest_degree() - 1);
    PolyhomSymbol r = detail::moyal_expand(a, b, low, top, int(std::lround(top - low)), MoyalTerms::odd);
    return r *= 2.0;
}

/// a^{(−1)} with a#a^{(−1)} = 1 modulo degree −N−1.
[[nodiscard]] inline PolyhomSymbol asymptotic_inverse(const PolyhomSymbol& a, int N) {
    const auto p = a.principal();
    detail::require_elliptic(p, "asymptotic_inverse");
    const double m = a.top_order();
    const int depth = std::min(N, a.exact() ? N : a.depth());
    PolyhomSymbol b(a.grid(), -m, depth);
    const Vector ip = p.plus.cwiseInverse(), im = p.minus.cwiseInverse();
    b.add(-m, ip, im, false);
    for (int j = 1; j <= depth; ++j) {
        const auto prod = detail::moyal_expand(a, b, -j, 0.0, j, MoyalTerms::all);
        auto [cp, cm] = prod.coefficient(-j);
        b.add(-m - j, -cp.cwiseProduct(ip), -cm.cwiseProduct(im), false);
    }
    return b;
}

/// ε real with ε#ε = a modulo degree 1−N, principal √(principal a).
[[nodiscard]] inline PolyhomSymbol asymptotic_sqrt(const PolyhomSymbol& a, int N) {
    if (!detail::same_degree(a.top_order(), 2.0)) throw SymbolError("asymptotic_sqrt: top order must be 2");
    const double scale = std::max(1.0, a.max_abs_coefficient());
    if (a.max_abs_imag() > 1e-12 * scale) throw SymbolError("asymptotic_sqrt: symbol is not real");
    const auto p = a.principal();
    const double mp = p.plus.real().minCoeff(), mm = p.minus.real().minCoeff();
    if (mp <= 0.0 || mm <= 0.0)
        throw SymbolError("asymptotic_sqrt: principal symbol not positive, min = " + std::to_string(std::min(mp, mm)));
    const int depth = std::min(N, a.exact() ? N : a.depth());
    PolyhomSymbol e(a.grid(), 1.0, depth);
    const Vector sp = p.plus.real().cwiseSqrt().cast<Complex>(), sm = p.minus.real().cwiseSqrt().cast<Complex>();
    e.add(1.0, sp, sm, false);
    const Vector hp = (2.0 * sp).cwiseInverse(), hm = (2.0 * sm).cwiseInverse();
    for (int j = 1; j <= depth; ++j) {
        const auto sq = detail::moyal_expand(e, e, 2.0 - j, 2.0, j, MoyalTerms::even);
        auto [qp, qm] = sq.coefficient(2.0 - j);
        auto [ap, am] = a.coefficient(2.0 - j);
        Vector np = -(qp - ap).cwiseProduct(hp), nm = -(qm - am).cwiseProduct(hm);
        // real input: imaginary parts are pure round-off
        np = np.real().cast<Complex>();
        nm = nm.real().cast<Complex>();
        e.add(1.0 - j, np, nm, false);
    }
    return e;
}

/// Symbols on uniform time nodes with finite-difference time derivatives.
class TimeSymbol {
public:
    TimeSymbol(std::vector<double> nodes, std::vector<PolyhomSymbol> symbols, int stencil_order = 8)
        : nodes_(std::move(nodes)), symbols_(std::move(symbols)), order_(stencil_order) {
        if (nodes_.size() != symbols_.size() || nodes_.empty())
            throw std::invalid_argument("time nodes and symbols must match");
        for (size_t i = 1; i < nodes_.size(); ++i)
            if (!(nodes_[i] > nodes_[i - 1])) throw std::invalid_argument("time nodes must increase");
        if (order_ < 2 || order_ % 2 != 0) throw std::invalid_argument("stencil order must be even and ≥ 2");
    }

    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<PolyhomSymbol>& symbols() const { return symbols_; }
    [[nodiscard]] const PolyhomSymbol& at(size_t i) const { return symbols_.at(i); }
    [[nodiscard]] size_t size() const { return nodes_.size(); }
    [[nodiscard]] int stencil_order() const { return order_; }

    [[nodiscard]] TimeSymbol derivative() const {
        std::vector<PolyhomSymbol> out;
        for (size_t i = 0; i < size(); ++i) {
            const auto [first, w] = stencil(i);
            PolyhomSymbol d = symbols_[i].rebased(symbols_[i].top_order(), symbols_[i].depth());
            d *= 0.0;
            for (size_t s = 0; s < w.size(); ++s) d = combine(d, 1.0, symbols_[first + s], w[s]);
            d.denoise_coefficients();
            out.push_back(d.rebased(symbols_[i].top_order(), symbols_[i].depth()));
        }
        return {nodes_, std::move(out), order_};
    }

    template <class F>
    [[nodiscard]] TimeSymbol map(F&& f) const {
        std::vector<PolyhomSymbol> out;
        for (size_t i = 0; i < size(); ++i) out.push_back(f(symbols_[i], i));
        return {nodes_, std::move(out), order_};
    }

    /// Finite-difference weights for d/dt at node i (first index, weights).
    [[nodiscard]] std::pair<size_t, std::vector<double>> stencil(size_t i) const {
        const size_t width = std::min<size_t>(order_ + 1, size());
        if (width < 2) throw std::invalid_argument("need at least two time nodes to differentiate");
        long first = long(i) - long(width / 2);
        first = std::clamp(first, 0L, long(size() - width));
        std::vector<double> x(nodes_.begin() + first, nodes_.begin() + first + width);
        return {size_t(first), fornberg_weights(nodes_[i], x, 1)};
    }

    /// Fornberg weights for the m-th derivative at z on nodes x.
    static std::vector<double> fornberg_weights(double z, const std::vector<double>& x, int m) {
        const int n = int(x.size()) - 1;
        std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
        double c1 = 1.0, c4 = x[0] - z;
        c[0][0] = 1.0;
        for (int i = 1; i <= n; ++i) {
            const int mn = std::min(i, m);
            double c2 = 1.0;
            const double c5 = c4;
            c4 = x[i] - z;
            for (int j = 0; j < i; ++j) {
                const double c3 = x[i] - x[j];
                c2 *= c3;
                if (j == i - 1) {
                    for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                    c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
                }
                for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
                c[j][0] = c4 * c[j][0] / c3;
            }
            c1 = c2;
        }
        std::vector<double> w(n + 1);
        for (int i = 0; i <= n; ++i) w[i] = c[i][m];
        return w;
    }

private:
    std::vector<double> nodes_;
    std::vector<PolyhomSymbol> symbols_;
    int order_;
};

/// Solves b = a + F(b) by iteration b_n = a + F(b_{n−1}). F must gain at least one degree.
[[nodiscard]] inline TimeSymbol fixed_point_solve(const TimeSymbol& a,
                                                  const std::function<TimeSymbol(const TimeSymbol&)>& F, int N) {
    const double top = a.at(0).top_order();
    const TimeSymbol probe_out = F(a);
    for (const auto& s : probe_out.symbols()) {
        double highest = -1e300;
        for (const auto& c : s.components())
            if (c.plus.cwiseAbs().maxCoeff() > 0 || c.minus.cwiseAbs().maxCoeff() > 0)
                highest = std::max(highest, c.degree);
        if (highest > top - 1 + detail::kDegreeTol)
            throw SymbolError("fixed_point_solve: map does not gain a degree (output degree " +
                              std::to_string(highest) + ", input top " + std::to_string(top) + ")");
    }
    auto add = [](const TimeSymbol& x, const TimeSymbol& y) {
        return x.map([&](const PolyhomSymbol& s, size_t i) {
            return (s + y.at(i)).rebased(s.top_order(), s.depth());
        });
    };
    TimeSymbol b = a;
    for (int it = 0; it < std::max(N, 1); ++it) b = add(a, F(b));
    return b;
}

}  // namespace hadamard
