#pragma once

#include "parametrix.hpp"
#include "report.hpp"
#include "states.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace hadamard {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using json = nlohmann::json;
namespace fs = std::filesystem;

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(const void* data, size_t size, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Header of the binary matrix format. Little-endian, 32 bytes:
/// rows (u64), L (f64), FNV-1a checksum of the payload (u64), cols (u64).
/// The payload is row-major with interleaved re/im f64.
struct MatrixHeader {
    std::uint64_t rows = 0;
    double length = 0.0;
    std::uint64_t checksum = 0;
    std::uint64_t cols = 0;
};
static_assert(sizeof(MatrixHeader) == 32);

namespace detail {
inline std::vector<double> row_major_payload(const Matrix& M) {
    std::vector<double> buf(size_t(2 * M.rows() * M.cols()));
    size_t k = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            buf[k++] = M(i, j).real();
            buf[k++] = M(i, j).imag();
        }
    return buf;
}
}  // namespace detail

/// Writes M and returns the payload checksum.
inline std::uint64_t write_matrix(const fs::path& path, const Matrix& M, double length) {
    const auto buf = detail::row_major_payload(M);
    MatrixHeader h{std::uint64_t(M.rows()), length, fnv1a(buf.data(), buf.size() * sizeof(double)),
                   std::uint64_t(M.cols())};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(double)));
    if (!out) throw IoError("write failed for " + path.string());
    return h.checksum;
}

struct StoredMatrix {
    Matrix matrix;
    double length = 0.0;
    std::uint64_t checksum = 0;
};

/// Reads a matrix and verifies size and checksum.
[[nodiscard]] inline StoredMatrix read_matrix(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    MatrixHeader h;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in) throw IoError(path.string() + ": truncated header");
    if (h.rows > (1u << 16) || h.cols > (1u << 16)) throw IoError(path.string() + ": implausible dimensions");
    std::vector<double> buf(size_t(2 * h.rows * h.cols));
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(double)));
    if (!in) throw IoError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
    if (fnv1a(buf.data(), buf.size() * sizeof(double)) != h.checksum)
        throw IoError(path.string() + ": checksum mismatch");
    Matrix M(Eigen::Index(h.rows), Eigen::Index(h.cols));
    size_t k = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j, k += 2) M(i, j) = Complex(buf[k], buf[k + 1]);
    return {std::move(M), h.length, h.checksum};
}

namespace detail {
inline json complex_list(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
    return a;
}
inline Vector complex_vector(const json& a, const SpatialGrid& g) {
    if (!a.is_array() || int(a.size()) != g.size()) throw IoError("coefficient list has wrong length");
    Vector v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = Complex(a[i].at(0).get<double>(), a[i].at(1).get<double>());
    return v;
}
}  // namespace detail

/// {top_order, depth, components: [{degree, polynomial, cplus: [[re,im]…], cminus: …}]}
[[nodiscard]] inline json symbol_to_json(const PolyhomSymbol& s) {
    json comps = json::array();
    for (const auto& c : s.components())
        comps.push_back({{"degree", c.degree},
                         {"polynomial", c.polynomial},
                         {"cplus", detail::complex_list(c.plus)},
                         {"cminus", detail::complex_list(c.minus)}});
    return {{"top_order", s.top_order()}, {"depth", s.depth()}, {"components", comps}};
}

[[nodiscard]] inline PolyhomSymbol symbol_from_json(const json& j, const SpatialGrid& g) {
    try {
        PolyhomSymbol s(g, j.at("top_order").get<double>(), j.at("depth").get<int>());
        for (const auto& c : j.at("components"))
            s.add(HomogeneousComponent{c.at("degree").get<double>(), detail::complex_vector(c.at("cplus"), g),
                                       detail::complex_vector(c.at("cminus"), g), c.at("polynomial").get<bool>()});
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed symbol document: ") + e.what());
    }
}

[[nodiscard]] inline json time_symbol_to_json(const TimeSymbol& s) {
    json syms = json::array();
    for (const auto& p : s.symbols()) syms.push_back(symbol_to_json(p));
    return {{"nodes", s.nodes()}, {"stencil_order", s.stencil_order()}, {"symbols", syms}};
}

[[nodiscard]] inline TimeSymbol time_symbol_from_json(const json& j, const SpatialGrid& g) {
    std::vector<PolyhomSymbol> syms;
    for (const auto& s : j.at("symbols")) syms.push_back(symbol_from_json(s, g));
    return {j.at("nodes").get<std::vector<double>>(), std::move(syms), j.at("stencil_order").get<int>()};
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

[[nodiscard]] inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

[[nodiscard]] inline std::string node_name(const std::string& stem, size_t j) {
    std::ostringstream os;
    os << stem << '_' << std::setw(3) << std::setfill('0') << j << ".bin";
    return os.str();
}

/// Bundle cache: binary dumps plus manifest.json {grid, window, N, R_cutoff, …, checksums}.
/// With `full`, B(t_j) and u±(t_j) are stored for every node; otherwise they are rebuilt on load.
inline void write_bundle(const fs::path& dir, const ParametrixBundle& P, bool full) {
    fs::create_directories(dir);
    const double L = P.grid.length();
    json sums = json::object();
    auto put = [&](const std::string& name, const Matrix& M) { sums[name] = hex64(write_matrix(dir / name, M, L)); };
    put("E.bin", P.E);
    put("r.bin", P.r);
    put("d_plus.bin", P.d_plus);
    put("d_minus.bin", P.d_minus);
    if (full)
        for (size_t j = 0; j < P.nodes.size(); ++j) {
            put(node_name("B", j), P.B[j]);
            put(node_name("u_plus", j), P.u_plus[j]);
            put(node_name("u_minus", j), P.u_minus[j]);
        }
    write_json(dir / "epsilon.json", time_symbol_to_json(P.epsilon));
    write_json(dir / "b.json", time_symbol_to_json(P.b));
    json m{{"grid", {{"n", P.grid.size()}, {"L", L}}},
           {"window", {{"t_max", P.nodes.back()}, {"nodes", P.nodes.size()}}},
           {"N", P.truncation},
           {"R_cutoff", P.r_cutoff},
           {"low_band", P.low_band},
           {"static", P.static_model},
           {"full", full},
           {"propagator", {{"plus_substeps", P.plus_record.substeps},
                           {"plus_change", P.plus_record.change},
                           {"minus_substeps", P.minus_record.substeps},
                           {"minus_change", P.minus_record.change}}},
           {"positivity", {{"eigmin", P.positivity_eigmin}, {"eigmax", P.positivity_eigmax}}},
           {"checksums", sums}};
    write_json(dir / "manifest.json", m);
}

/// Loads a bundle cache, verifying every checksum listed in the manifest. When the propagators were
/// not stored they are rebuilt from the stored symbols and the model with `opt`.
[[nodiscard]] inline ParametrixBundle read_bundle(const fs::path& dir, const ModelCoefficients& mc,
                                                  const ParametrixOptions& opt) {
    const json m = read_json(dir / "manifest.json");
    const SpatialGrid g(m.at("grid").at("n").get<int>(), m.at("grid").at("L").get<double>());
    if (!(g == mc.grid())) throw IoError("bundle cache grid differs from the model grid");
    auto load = [&](const std::string& name) {
        StoredMatrix s = read_matrix(dir / name);
        const auto& sums = m.at("checksums");
        if (!sums.contains(name) || sums.at(name).get<std::string>() != hex64(s.checksum))
            throw IoError(name + ": checksum differs from manifest");
        if (s.matrix.rows() != g.size()) throw IoError(name + ": size differs from manifest grid");
        return s.matrix;
    };
    TimeSymbol eps = time_symbol_from_json(read_json(dir / "epsilon.json"), g);
    TimeSymbol b = time_symbol_from_json(read_json(dir / "b.json"), g);
    const auto nodes = b.nodes();
    const Matrix r = load("r.bin");
    auto [T, Ti] = build_T(g, r);
    ParametrixBundle P{g, nodes, m.at("N").get<int>(), m.at("R_cutoff").get<double>(),
                       m.at("low_band").get<double>(), m.at("static").get<bool>(), std::move(eps), std::move(b),
                       {}, load("E.bin"), r, load("d_plus.bin"), load("d_minus.bin"), {}, {}, T, Ti, {}, {},
                       m.at("positivity").at("eigmin").get<double>(), m.at("positivity").at("eigmax").get<double>()};
    const auto& pr = m.at("propagator");
    P.plus_record = {pr.at("plus_substeps").get<int>(), pr.at("plus_change").get<double>()};
    P.minus_record = {pr.at("minus_substeps").get<int>(), pr.at("minus_change").get<double>()};
    if (m.at("full").get<bool>()) {
        for (size_t j = 0; j < nodes.size(); ++j) {
            P.B.push_back(load(node_name("B", j)));
            P.u_plus.push_back(load(node_name("u_plus", j)));
            P.u_minus.push_back(load(node_name("u_minus", j)));
        }
    } else {
        P.B = quantize_b(mc, P.b, P.low_band);
        compute_propagators(P, opt);
    }
    return P;
}

/// State export: lambda.bin (2n×2n) and manifest.json with the check rows.
inline void write_state(const fs::path& dir, const std::string& kind, const TwoPointFunction& s,
                        const std::vector<CheckRow>& rows) {
    fs::create_directories(dir);
    const auto sum = write_matrix(dir / "lambda.bin", s.lambda.entries, s.grid().length());
    json jr = json::array();
    for (const auto& r : rows)
        jr.push_back({{"check", r.check}, {"value", r.value}, {"threshold", r.threshold}, {"pass", r.pass}});
    write_json(dir / "manifest.json", {{"kind", kind},
                                       {"grid", {{"n", s.grid().size()}, {"L", s.grid().length()}}},
                                       {"blocks", {{"file", "lambda.bin"}, {"checksum", hex64(sum)}}},
                                       {"checks", jr}});
}

/// Oracle dump: one row per node, φ(t_j) in the columns.
inline std::uint64_t write_solution(const fs::path& path, const std::vector<Vector>& phi, double length) {
    Matrix M(Eigen::Index(phi.size()), phi.front().size());
    for (size_t j = 0; j < phi.size(); ++j) M.row(Eigen::Index(j)) = phi[j].transpose();
    return write_matrix(path, M, length);
}

/// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) throw IoError("run directory " + dir.string() + " is locked by another process");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto w = ::write(fd_, pid.data(), pid.size());
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
    int fd_ = -1;
};

}  // namespace hadamard
