#pragma once

#include "expr.hpp"
#include "geometry.hpp"
#include "parametrix.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace hadamard {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Validated run configuration. See README for the key reference.
struct RunConfig {
    int n = 256;
    double L = kTwoPi;
    double t_max = 1.0;
    int nodes = 65;
    int truncation = 6;
    double r_cutoff = 2.0;
    double low_band = 2.0;

    double tol_identity = 1e-10;
    double tol_propagator = 1e-9;
    double tol_oracle = 1e-10;
    double tol_purity = 1e-9;

    std::string source = "preset";  // preset | metric | coefficients
    std::string preset = "breathing-metric";
    std::map<std::string, Expression> metric;        // c, h, V, A, rho
    std::map<std::string, Expression> coefficients;  // a11, b1_re, b1_im, m

    std::string state_kind = "canonical";  // canonical | family | pure
    double state_a_scale = 0.5;
    double state_b_scale = 0.5;
    double state_a0 = 0.5;
    double state_width = 3.0;

    int group_count = 10;
    double group_size = 0.1;

    double kms_beta = 1.0;

    int glue_charts = 2;
    double glue_overlap = 0.5;

    std::vector<int> egorov_modes{8, 16};
    int egorov_node = 32;
    int egorov_sign = -1;  // flow sign tried first

    int split_count = 10;
    std::vector<int> split_bands{16, 32};
    double split_t_max = 4.0;
    int split_nodes = 257;

    std::vector<int> verify_bands{8, 16, 32};
    int verify_samples = 2;
    std::vector<int> sweep_truncations{4, 6, 8};
    std::vector<int> sweep_sizes{128, 256};

    std::string bundle_cache;  // directory of a bundle written by `parametrix`
    bool bundle_full = false;

    std::uint64_t seed = 1;

    [[nodiscard]] SpatialGrid grid() const { return SpatialGrid(n, L); }
    [[nodiscard]] ParametrixOptions parametrix_options() const {
        ParametrixOptions o;
        o.truncation = truncation;
        o.t_max = t_max;
        o.nodes = nodes;
        o.r_cutoff = r_cutoff;
        o.low_band = low_band;
        o.propagator_tol = tol_propagator;
        return o;
    }
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& key, const std::string& v) {
    try {
        return Expression::parse(v)(0.0, 0.0);
    } catch (const ExprError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
    }
    if (used != v.size()) throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(int(parse_integer(key, trim(item))));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false");
}
}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
[[nodiscard]] inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq)), v = detail::trim(line.substr(eq + 1));
        if (key.empty() || v.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
        if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key " + key);
        auto num = [&] { return detail::parse_number(key, v); };
        auto integer = [&] { return int(detail::parse_integer(key, v)); };
        auto expr = [&] {
            try {
                return Expression::parse(v);
            } catch (const ExprError& e) {
                throw ConfigError(key + ": " + e.what());
            }
        };
        if (key == "grid.n") c.n = integer();
        else if (key == "grid.L") c.L = num();
        else if (key == "window.t_max") c.t_max = num();
        else if (key == "window.nodes") c.nodes = integer();
        else if (key == "truncation") c.truncation = integer();
        else if (key == "r_cutoff") c.r_cutoff = num();
        else if (key == "low_band") c.low_band = num();
        else if (key == "tolerances.identity") c.tol_identity = num();
        else if (key == "tolerances.propagator") c.tol_propagator = num();
        else if (key == "tolerances.oracle") c.tol_oracle = num();
        else if (key == "tolerances.purity") c.tol_purity = num();
        else if (key == "model.source") c.source = v;
        else if (key == "model.preset") c.preset = v;
        else if (key.rfind("metric.", 0) == 0) {
            const std::string f = key.substr(7);
            if (f != "c" && f != "h" && f != "V" && f != "A" && f != "rho") throw ConfigError("unknown key " + key);
            c.metric[f] = expr();
        } else if (key.rfind("coefficients.", 0) == 0) {
            const std::string f = key.substr(13);
            if (f != "a11" && f != "b1_re" && f != "b1_im" && f != "m") throw ConfigError("unknown key " + key);
            c.coefficients[f] = expr();
        } else if (key == "state.kind") c.state_kind = v;
        else if (key == "state.a_scale") c.state_a_scale = num();
        else if (key == "state.b_scale") c.state_b_scale = num();
        else if (key == "state.a0") c.state_a0 = num();
        else if (key == "state.width") c.state_width = num();
        else if (key == "group.count") c.group_count = integer();
        else if (key == "group.size") c.group_size = num();
        else if (key == "kms.beta") c.kms_beta = num();
        else if (key == "glue.charts") c.glue_charts = integer();
        else if (key == "glue.overlap") c.glue_overlap = num();
        else if (key == "egorov.modes") c.egorov_modes = detail::parse_int_list(key, v);
        else if (key == "egorov.node") c.egorov_node = integer();
        else if (key == "egorov.sign") c.egorov_sign = integer();
        else if (key == "split.count") c.split_count = integer();
        else if (key == "split.bands") c.split_bands = detail::parse_int_list(key, v);
        else if (key == "split.t_max") c.split_t_max = num();
        else if (key == "split.nodes") c.split_nodes = integer();
        else if (key == "verify.bands") c.verify_bands = detail::parse_int_list(key, v);
        else if (key == "verify.samples") c.verify_samples = integer();
        else if (key == "sweep.truncations") c.sweep_truncations = detail::parse_int_list(key, v);
        else if (key == "sweep.sizes") c.sweep_sizes = detail::parse_int_list(key, v);
        else if (key == "bundle.cache") c.bundle_cache = v;
        else if (key == "bundle.full") c.bundle_full = detail::parse_bool(key, v);
        else if (key == "seed") c.seed = std::uint64_t(detail::parse_integer(key, v));
        else throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + key);
    }
    return c;
}

[[nodiscard]] inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse_config(in);
}

/// Range and consistency checks, run before any computation.
inline void validate(const RunConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.n >= 32 && c.n <= 1024 && c.n % 2 == 0, "grid.n must be even and in [32, 1024]");
    require(c.L > 0, "grid.L must be positive");
    require(c.t_max > 0, "window.t_max must be positive");
    require(c.nodes >= 9, "window.nodes must be at least 9");
    require(c.truncation >= 1 && c.truncation <= 12, "truncation must be in [1, 12]");
    require(c.r_cutoff > 0 && c.low_band > 0, "r_cutoff and low_band must be positive");
    for (double t : {c.tol_identity, c.tol_propagator, c.tol_oracle, c.tol_purity})
        require(t > 0 && t < 1, "tolerances must lie in (0, 1)");
    require(c.source == "preset" || c.source == "metric" || c.source == "coefficients",
            "model.source must be preset, metric or coefficients");
    if (c.source == "preset")
        require(c.preset == "static-massive" || c.preset == "breathing-metric" || c.preset == "gauge-potential",
                "model.preset must be static-massive, breathing-metric or gauge-potential");
    if (c.source == "metric") require(!c.metric.empty(), "model.source = metric needs metric.* keys");
    if (c.source == "coefficients") require(c.coefficients.count("a11") == 1, "coefficients.a11 is required");
    if (c.source != "metric") require(c.metric.empty(), "metric.* keys need model.source = metric");
    if (c.source != "coefficients") require(c.coefficients.empty(), "coefficients.* keys need model.source = coefficients");
    require(c.state_kind == "canonical" || c.state_kind == "family" || c.state_kind == "pure",
            "state.kind must be canonical, family or pure");
    require(c.state_a_scale >= 0 && c.state_b_scale >= 0, "state scales must be nonnegative");
    require(c.state_a0 >= 0 && c.state_a0 <= 1, "state.a0 must lie in [0, 1]");
    require(c.state_width > 0, "state.width must be positive");
    require(c.group_count >= 1 && c.group_size >= 0, "group.count ≥ 1 and group.size ≥ 0");
    require(c.kms_beta > 0, "kms.beta must be positive");
    require(c.glue_charts >= 1 && c.glue_overlap > 0 && c.glue_overlap <= 1, "glue.charts ≥ 1, glue.overlap in (0, 1]");
    for (int m : c.egorov_modes) require(m > 0 && m <= c.n / 8, "egorov.modes must lie in [1, n/8]");
    require(c.egorov_modes.size() >= 2, "egorov.modes needs at least two frequencies");
    require(c.egorov_node >= 0 && c.egorov_node < c.nodes, "egorov.node must index a time node");
    require(c.egorov_sign == 1 || c.egorov_sign == -1, "egorov.sign must be 1 or -1");
    require(c.split_count >= 1, "split.count must be positive");
    require(c.split_bands.size() >= 2, "split.bands needs at least two bands");
    for (int K : c.split_bands) require(K >= 1 && 2 * K - 1 < c.n / 2 - c.n / 8, "split.bands must be resolved");
    require(c.split_t_max > 0 && c.split_nodes >= 32, "split.t_max > 0 and split.nodes ≥ 32");
    for (int K : c.verify_bands) require(K >= 1 && 2 * K - 1 < c.n / 2 - c.n / 8, "verify.bands must be resolved");
    require(c.verify_bands.size() >= 2, "verify.bands needs at least two bands");
    require(c.verify_samples >= 1, "verify.samples must be positive");
    for (int N : c.sweep_truncations) require(N >= 1 && N <= 12, "sweep.truncations must lie in [1, 12]");
    for (int n : c.sweep_sizes) require(n >= 32 && n <= 1024 && n % 2 == 0, "sweep.sizes must be even in [32, 1024]");
}

/// Built-in metrics.
///  static-massive:   c = 1 + 0.2 sin x, h = 1 + 0.3 cos x, ρ = 1, static
///  breathing-metric: h = s(t)²(1 + 0.2 cos x), s(t) = 1 + 0.2 sin 3t, ρ = 1
///  gauge-potential:  h = 1 + 0.2 cos x, V = 0.4 cos x, A = 0.3 sin 2x, ρ = 1
[[nodiscard]] inline MetricData preset_metric(const std::string& name) {
    MetricData M;
    if (name == "static-massive") {
        M.c = [](double, double x) { return 1.0 + 0.2 * std::sin(x); };
        M.h = [](double, double x) { return 1.0 + 0.3 * std::cos(x); };
        M.time_dependent = false;
    } else if (name == "breathing-metric") {
        M.h = [](double t, double x) {
            const double s = 1.0 + 0.2 * std::sin(3.0 * t);
            return s * s * (1.0 + 0.2 * std::cos(x));
        };
    } else if (name == "gauge-potential") {
        M.h = [](double, double x) { return 1.0 + 0.2 * std::cos(x); };
        M.V = [](double, double x) { return 0.4 * std::cos(x); };
        M.A = [](double, double x) { return 0.3 * std::sin(2.0 * x); };
    } else {
        throw ConfigError("unknown preset " + name);
    }
    return M;
}

/// Metric from metric.* expressions, with unspecified fields at their defaults.
[[nodiscard]] inline MetricData metric_from_expressions(const std::map<std::string, Expression>& e) {
    MetricData M;
    bool time = false;
    auto field = [&](const char* key, ScalarField& out) {
        if (const auto it = e.find(key); it != e.end()) {
            const Expression ex = it->second;
            out = [ex](double t, double x) { return ex(t, x); };
            time = time || ex.uses_time();
        }
    };
    field("c", M.c);
    field("h", M.h);
    field("V", M.V);
    field("A", M.A);
    field("rho", M.rho);
    M.time_dependent = time;
    return M;
}

/// Model coefficients for the configured source. Physical coordinates x ∈ [0, L).
[[nodiscard]] inline ModelCoefficients build_model(const RunConfig& c) {
    const SpatialGrid g = c.grid();
    if (c.source == "preset") return reduce_to_model(preset_metric(c.preset), g);
    if (c.source == "metric") return reduce_to_model(metric_from_expressions(c.metric), g);
    const auto get = [&](const char* key) -> std::optional<Expression> {
        const auto it = c.coefficients.find(key);
        if (it == c.coefficients.end()) return std::nullopt;
        return it->second;
    };
    bool time = false;
    for (const auto& [k, e] : c.coefficients) time = time || e.uses_time();
    auto as_field = [](const std::optional<Expression>& e, double fallback) -> ScalarField {
        if (!e) return [fallback](double, double) { return fallback; };
        return [ex = *e](double t, double x) { return ex(t, x); };
    };
    return model_from_coefficients(g, as_field(get("a11"), 1.0), as_field(get("b1_re"), 0.0),
                                   as_field(get("b1_im"), 0.0), as_field(get("m"), 1.0), time);
}

}  // namespace hadamard
