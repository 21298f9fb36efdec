#pragma once

#include "checks.hpp"
#include "config.hpp"
#include "io.hpp"

#include <cstdio>

namespace hadamard {

/// Outcome of one subcommand: the rows written to report.json / report.csv.
struct CommandResult {
    std::string command;
    std::vector<CheckRow> rows;
    json extra = json::object();
    [[nodiscard]] int exit_code() const { return all_pass(rows) ? 0 : 1; }
};

namespace detail {

inline json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline ModelCoefficients model_for(const RunConfig& c) {
    try {
        return build_model(c);
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

/// Metric used by the factorization check, when the model comes from one.
inline std::optional<MetricData> metric_for(const RunConfig& c) {
    if (c.source == "preset") return preset_metric(c.preset);
    if (c.source == "metric") return metric_from_expressions(c.metric);
    return std::nullopt;
}

inline void require_bundle_matches(const ParametrixBundle& P, const RunConfig& c) {
    if (P.truncation != c.truncation) throw IoError("bundle cache has N = " + std::to_string(P.truncation));
    if (int(P.nodes.size()) != c.nodes || std::abs(P.nodes.back() - c.t_max) > 1e-12)
        throw IoError("bundle cache window differs from the configuration");
}

inline ParametrixBundle bundle_for(const RunConfig& c, const ModelCoefficients& mc) {
    if (!c.bundle_cache.empty()) {
        ParametrixBundle P = read_bundle(c.bundle_cache, mc, c.parametrix_options());
        require_bundle_matches(P, c);
        return P;
    }
    return build_parametrix(mc, c.parametrix_options());
}

inline DecayOptions decay_options(const RunConfig& c) {
    DecayOptions o;
    o.bands.clear();
    for (double K : {4.0, 8.0, 16.0, 32.0, 64.0})
        if (K <= c.n / 2 - c.n / 8) o.bands.push_back(K);
    // the lowest band only when the grid leaves fewer than four
    if (o.bands.size() > 3) o.bands.erase(o.bands.begin());
    return o;
}

inline OracleOptions oracle_options(const RunConfig& c) {
    OracleOptions o;
    o.tol = c.tol_oracle;
    return o;
}

}  // namespace detail

/// report.json and report.csv for a finished command.
inline void write_report(const fs::path& dir, const CommandResult& r, const RunConfig& c) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"check", row.check},
                        {"anchor", row.anchor},
                        {"value", detail::number(row.value)},
                        {"relation", row.relation},
                        {"threshold", detail::number(row.threshold)},
                        {"pass", row.pass}});
    json doc{{"command", r.command}, {"seed", c.seed}, {"pass", all_pass(r.rows)}, {"rows", rows}};
    if (!r.extra.empty()) doc["details"] = r.extra;
    write_json(dir / "report.json", doc);
    std::ofstream csv(dir / "report.csv", std::ios::binary);
    csv << "check,anchor,value,relation,threshold,pass\n";
    for (const auto& row : r.rows)
        csv << detail::csv_field(row.check) << ',' << detail::csv_field(row.anchor) << ','
            << detail::csv_number(row.value) << ',' << row.relation << ',' << detail::csv_number(row.threshold) << ','
            << (row.pass ? "true" : "false") << '\n';
    if (!csv) throw IoError("cannot write report.csv");
}

/// Samples a¹¹, b¹ and m on the time nodes into coefficients_*.bin (one row per node).
inline CommandResult cmd_reduce(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    const SpatialGrid g = c.grid();
    const auto nodes = uniform_nodes(c.t_max, c.nodes);
    Matrix a11(c.nodes, g.size()), b1(c.nodes, g.size()), m(c.nodes, g.size());
    double min_a11 = 1e300;
    for (int j = 0; j < c.nodes; ++j) {
        const auto s = mc.at(nodes[j]);
        a11.row(j) = s.a11.cast<Complex>().transpose();
        b1.row(j) = s.b1.transpose();
        m.row(j) = s.m.cast<Complex>().transpose();
        min_a11 = std::min(min_a11, s.a11.minCoeff());
    }
    json sums{{"coefficients_a11.bin", hex64(write_matrix(out / "coefficients_a11.bin", a11, g.length()))},
              {"coefficients_b1.bin", hex64(write_matrix(out / "coefficients_b1.bin", b1, g.length()))},
              {"coefficients_m.bin", hex64(write_matrix(out / "coefficients_m.bin", m, g.length()))}};
    write_json(out / "coefficients.json", {{"grid", {{"n", g.size()}, {"L", g.length()}}},
                                           {"window", {{"t_max", c.t_max}, {"nodes", c.nodes}}},
                                           {"time_dependent", mc.time_dependent()},
                                           {"checksums", sums}});
    CommandResult r{"reduce", {make_row("a11-lower-bound", "model-reduction", min_a11, ">", 0.0)}};
    if (const auto M = detail::metric_for(c)) {
        double worst = 0.0;
        for (double t : {0.0, 0.5 * c.t_max, c.t_max})
            for (const Vector& psi : test_battery(g, c.seed)) worst = std::max(worst, factorization_residual(*M, mc, t, psi, 3.0));
        r.rows.push_back(make_row("factorization-residual", "model-reduction", worst, "<", 1e-8));
    }
    return r;
}

/// Builds the bundle and writes it to out/bundle.
inline CommandResult cmd_parametrix(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    const ParametrixBundle P = build_parametrix(mc, c.parametrix_options());
    write_bundle(out / "bundle", P, c.bundle_full);
    const Eigen::Index n = P.grid.size();
    const Matrix I2 = Matrix::Identity(2 * n, 2 * n);
    return {"parametrix",
            {make_row("transform-inverse", "transform-T", relative_deviation((P.T * P.T_inv).entries, I2), "<=", c.tol_identity),
             make_row("splitting-sum", "splitting-d", relative_deviation(P.d_plus + P.d_minus, Matrix::Identity(n, n)), "<=",
                      c.tol_identity),
             make_row("r-positivity", "r-condition", P.positivity_eigmin, ">", 0.0),
             make_row("propagator-plus-change", "propagators", P.plus_record.change, "<=", c.tol_propagator),
             make_row("propagator-minus-change", "propagators", P.minus_record.change, "<=", c.tol_propagator)},
            {{"R_cutoff", P.r_cutoff}}};
}

/// Exports the configured state (canonical, family or pure) with its checks.
inline CommandResult cmd_state(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    const ParametrixBundle P = detail::bundle_for(c, mc);
    const SpatialGrid& g = P.grid;
    std::mt19937_64 rng(c.seed);
    TwoPointFunction s = canonical_state(g, P.r);
    std::vector<CheckRow> rows;
    if (c.state_kind == "family") {
        StateSpec spec{random_smoothing(g, c.state_width, c.state_a_scale, rng),
                       random_smoothing(g, c.state_width, c.state_b_scale, rng),
                       c.state_a0 * Matrix::Identity(g.size(), g.size())};
        s = hadamard_family(P, spec, -8.0, detail::decay_options(c));
        const FamilyConditions fc = check_family_conditions(g, hadamard_tilde(g, spec), 8, rng);
        rows.push_back(make_row("family-pp-minus-one", "family-positivity", fc.eigmin_pp_minus_one, ">=", -fc.tolerance));
        rows.push_back(make_row("family-mm", "family-positivity", fc.eigmin_mm, ">=", -fc.tolerance));
        rows.push_back(make_row("family-cauchy-schwarz", "family-positivity", fc.cs_ratio, "<=", 1.0 + 1e-9));
        rows.push_back(make_row("family-shifted-cauchy-schwarz", "family-positivity", fc.cs_shifted_ratio, "<=", 1.0 + 1e-9));
    } else if (c.state_kind == "pure") {
        const Matrix a = random_smoothing(g, c.state_width, c.state_a_scale, rng);
        s = pure_state_from(P, a);
        const UTildeCheck u = check_u_tilde(g, a);
        rows.push_back(make_row("pure-intertwining", "pure-canonical-form", u.intertwining, "<=", c.tol_purity));
        rows.push_back(make_row("pure-u-charge", "pure-canonical-form", u.charge, "<=", c.tol_purity));
        rows.push_back(make_row("pure-u-projection", "pure-canonical-form", u.projection, "<=", c.tol_purity));
    }
    const PositivityReport pos = check_positivity(s);
    rows.push_back(make_row("positivity-plus", "two-point-positivity", pos.eigmin_plus, ">=", -pos.tolerance));
    rows.push_back(make_row("positivity-minus", "two-point-positivity", pos.eigmin_minus, ">=", -pos.tolerance));
    if (c.state_kind != "family")
        rows.push_back(make_row("purity", "purity", check_purity(s), "<=", c.tol_purity));
    const double thr = -(P.truncation - 1) + 0.5;
    const MuscReport musc = check_musc_proxy(s, P.T_inv, thr, detail::decay_options(c));
    rows.push_back(make_row("musc-worst-slope", "microlocal-proxy", musc.worst_slope(), "<=", thr));
    write_state(out / "state", c.state_kind, s, rows);
    return {"state", rows};
}

/// Identities, smoothing residuals, parametrix against the oracle, and the splitting checks.
inline CommandResult cmd_verify(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    const ParametrixBundle P = detail::bundle_for(c, mc);
    CommandResult r{"verify", identity_rows(P, c.group_count, c.group_size, c.seed, c.tol_identity)};
    for (auto& row : smoothing_rows(mc, P, P.nodes.size() / 2, detail::decay_options(c))) r.rows.push_back(row);

    std::mt19937_64 rng(c.seed);
    const auto data = band_data(P.grid, c.verify_bands, c.verify_samples, rng);
    const auto sols = solve_cauchy_direct(mc, data, P.nodes, detail::oracle_options(c));
    const OracleAgreement a = oracle_agreement(P, data, sols, c.verify_bands);
    for (auto& row : oracle_rows(a, P.truncation)) r.rows.push_back(row);
    fs::create_directories(out / "oracle");
    json dumps = json::object();
    for (size_t i = 0; i < sols.size(); ++i) {
        const std::string name = "solution_" + std::to_string(i) + ".bin";
        dumps[name] = hex64(write_solution(out / "oracle" / name, sols[i].phi, P.grid.length()));
    }
    write_json(out / "oracle" / "manifest.json", {{"nodes", P.nodes}, {"bands", c.verify_bands},
                                                  {"samples", c.verify_samples}, {"checksums", dumps}});

    SplittingOptions so;
    so.count = c.split_count;
    so.frequency_bands = c.split_bands;
    so.t_max = c.split_t_max;
    so.nodes = c.split_nodes;
    for (auto& row : splitting_rows(P, mc, c.seed, so)) r.rows.push_back(row);
    r.extra["oracle_errors"] = a.error;
    return r;
}

/// Vacuum against λ(E⁻¹), b against ε and the KMS state; needs a static model.
inline CommandResult cmd_static(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    if (mc.time_dependent()) throw ConfigError("static needs a time-independent model");
    CommandResult r{"static", static_rows(mc, c.truncation, c.kms_beta, c.tol_identity, detail::decay_options(c))};
    const Matrix A = detail::model_matrix(mc, 0.0);
    write_state(out / "vacuum", "vacuum", static_vacuum(mc.grid(), A), {});
    write_state(out / "kms", "kms", static_kms(mc.grid(), A, c.kms_beta), {});
    return r;
}

inline CommandResult cmd_glue(const RunConfig& c, const fs::path& out) {
    const ModelCoefficients mc = detail::model_for(c);
    const ParametrixBundle P = detail::bundle_for(c, mc);
    GlueResult g = glue_check(P, c.glue_charts, c.glue_overlap, c.seed, detail::decay_options(c));
    g.rows.push_back(make_row("glue-purity-residual", "gluing", check_purity(g.state), ">=", 0.0));
    write_state(out / "state", "glued", g.state, g.rows);
    return {"glue", g.rows};
}

inline CommandResult cmd_egorov(const RunConfig& c, const fs::path&) {
    const ModelCoefficients mc = detail::model_for(c);
    const ParametrixBundle P = detail::bundle_for(c, mc);
    const auto metric = detail::metric_for(c);
    EgorovOutcome e = egorov_rows(P, mc, metric ? &*metric : nullptr, c.egorov_modes, size_t(c.egorov_node),
                                  c.egorov_sign, c.seed);
    json samples = json::array();
    for (const auto& s : e.report.samples) samples.push_back({{"k0", s.k0}, {"deviation", s.deviation}});
    return {"egorov", e.rows, {{"flow_sign", e.report.sign}, {"samples", samples}}};
}

/// Parametrix-vs-oracle errors over N and n; writes sweep.csv with one line per (n, N, band).
inline CommandResult cmd_sweep(const RunConfig& c, const fs::path& out) {
    CommandResult r{"sweep", {}};
    std::ofstream csv(out / "sweep.csv", std::ios::binary);
    csv << "n,N,band,error\n";
    for (int n : c.sweep_sizes) {
        RunConfig local = c;
        local.n = n;
        local.verify_bands.clear();
        for (int K : c.verify_bands)
            if (2 * K - 1 < n / 2 - n / 8) local.verify_bands.push_back(K);
        if (local.verify_bands.size() < 2) throw ConfigError("sweep size " + std::to_string(n) + " resolves fewer than two bands");
        const ModelCoefficients mc = detail::model_for(local);
        std::mt19937_64 rng(c.seed);
        const auto data = band_data(mc.grid(), local.verify_bands, c.verify_samples, rng);
        const auto sols = solve_cauchy_direct(mc, data, uniform_nodes(c.t_max, c.nodes), detail::oracle_options(c));
        std::vector<double> top;
        for (int N : c.sweep_truncations) {
            local.truncation = N;
            const ParametrixBundle P = build_parametrix(mc, local.parametrix_options());
            const OracleAgreement a = oracle_agreement(P, data, sols, local.verify_bands);
            for (size_t i = 0; i < a.bands.size(); ++i)
                csv << n << ',' << N << ',' << a.bands[i] << ',' << detail::csv_number(a.error[i]) << '\n';
            CheckRow row = oracle_rows(a, N).front();
            row.check += "-n" + std::to_string(n) + "-N" + std::to_string(N);
            r.rows.push_back(row);
            top.push_back(a.error.back());
        }
        if (top.size() >= 2) {
            CheckRow row = monotone_row(top);
            row.check += "-n" + std::to_string(n);
            r.rows.push_back(row);
        }
    }
    if (!csv) throw IoError("cannot write sweep.csv");
    return r;
}

inline const std::map<std::string, CommandResult (*)(const RunConfig&, const fs::path&)>& commands() {
    static const std::map<std::string, CommandResult (*)(const RunConfig&, const fs::path&)> table{
        {"reduce", cmd_reduce}, {"parametrix", cmd_parametrix}, {"state", cmd_state}, {"verify", cmd_verify},
        {"static", cmd_static}, {"glue", cmd_glue},             {"egorov", cmd_egorov}, {"sweep", cmd_sweep}};
    return table;
}

/// Runs one subcommand under the run-directory lock and writes its report.
/// Exit codes: 0 all checks pass, 1 a check failed (report written), 2 configuration or I/O error.
inline int run_command(const std::string& name, const std::string& config_path, const fs::path& out,
                       std::optional<std::uint64_t> seed, std::ostream& err) {
    try {
        const auto it = commands().find(name);
        if (it == commands().end()) throw ConfigError("unknown subcommand " + name);
        RunConfig c = load_config(config_path);
        if (seed) c.seed = *seed;
        validate(c);
        RunLock lock(out);
        const CommandResult r = it->second(c, out);
        write_report(out, r, c);
        for (const auto& row : r.rows)
            if (!row.pass) err << "check failed: " << row.check << " value " << row.value << " " << row.relation << " "
                               << row.threshold << "\n";
        return r.exit_code();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return 2;
}

}  // namespace hadamard
