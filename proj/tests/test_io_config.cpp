#include "hadamard/config.hpp"
#include "hadamard/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace hadamard;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hadamard_io_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(validate(RunConfig{})); }

TEST(Config, ParsesKeysAndComments) {
    const auto c = parse("grid.n = 128  # comment\n# full line\n\ntruncation=4\negorov.modes = 4, 8\nbundle.full = true\n");
    EXPECT_EQ(c.n, 128);
    EXPECT_EQ(c.truncation, 4);
    EXPECT_EQ(c.egorov_modes, (std::vector<int>{4, 8}));
    EXPECT_TRUE(c.bundle_full);
}

TEST(Config, RejectsUnknownAndRepeatedKeys) {
    EXPECT_THROW((void)parse("grid.size = 64\n"), ConfigError);
    EXPECT_THROW((void)parse("metric.g = 1\n"), ConfigError);
    EXPECT_THROW((void)parse("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW((void)parse("seed\n"), ConfigError);
}

TEST(Config, RejectsMalformedValues) {
    EXPECT_THROW((void)parse("grid.n = 12x\n"), ConfigError);
    EXPECT_THROW((void)parse("window.t_max = fast\n"), ConfigError);
    EXPECT_THROW((void)parse("metric.c = 1 + \n"), ConfigError);
}

TEST(Config, ValidationRanges) {
    auto bad = [](auto mutate) {
        RunConfig c;
        mutate(c);
        EXPECT_THROW(validate(c), ConfigError);
    };
    bad([](RunConfig& c) { c.n = 30; });
    bad([](RunConfig& c) { c.truncation = 0; });
    bad([](RunConfig& c) { c.preset = "flat"; });
    bad([](RunConfig& c) { c.state_a0 = 1.5; });
    bad([](RunConfig& c) { c.egorov_sign = 0; });
    bad([](RunConfig& c) { c.tol_identity = 0.0; });
    bad([](RunConfig& c) { c.source = "metric"; });
    bad([](RunConfig& c) { c.verify_bands = {8, 64}; });
}

TEST(Config, ShippedConfigsValidate) {
    for (const auto& e : fs::directory_iterator(HADAMARD_CONFIG_DIR)) {
        if (e.path().extension() != ".conf") continue;
        EXPECT_NO_THROW(validate(load_config(e.path().string()))) << e.path();
    }
}

TEST(Config, CoefficientModel) {
    const auto c = parse("model.source = coefficients\ncoefficients.a11 = 2 + cos(x)\ncoefficients.m = 3\n");
    validate(c);
    const auto mc = build_model(c);
    EXPECT_FALSE(mc.time_dependent());
    const auto s = mc.at(0.0);
    EXPECT_NEAR(s.a11[0], 3.0, 1e-12);
    EXPECT_NEAR(s.m[5], 3.0, 1e-12);
}

TEST(Expression, Grammar) {
    EXPECT_NEAR(Expression::parse("2^3^2")(0, 0), 512.0, 1e-12);
    EXPECT_NEAR(Expression::parse("-2^2")(0, 0), -4.0, 1e-12);
    EXPECT_NEAR(Expression::parse("sin(pi/2) + t*x")(2, 3), 7.0, 1e-12);
    EXPECT_TRUE(Expression::parse("cos(t)").uses_time());
    EXPECT_FALSE(Expression::parse("cos(x)").uses_time());
    EXPECT_THROW((void)Expression::parse("foo(x)"), ExprError);
    EXPECT_THROW((void)Expression::parse("(1"), ExprError);
}

TEST(MatrixFile, RoundTripAndChecksum) {
    const fs::path d = scratch("matrix");
    Matrix M(3, 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) M(i, j) = Complex(i + 0.5 * j, -j);
    const auto sum = write_matrix(d / "m.bin", M, 2.5);
    EXPECT_EQ(fs::file_size(d / "m.bin"), 32u + 3 * 5 * 16);
    const auto s = read_matrix(d / "m.bin");
    EXPECT_EQ(s.checksum, sum);
    EXPECT_EQ(s.length, 2.5);
    EXPECT_EQ((s.matrix - M).cwiseAbs().maxCoeff(), 0.0);
    {
        std::fstream f(d / "m.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    EXPECT_THROW((void)read_matrix(d / "m.bin"), IoError);
    fs::resize_file(d / "m.bin", 20);
    EXPECT_THROW((void)read_matrix(d / "m.bin"), IoError);
    fs::remove_all(d);
}

TEST(SymbolJson, RoundTrip) {
    const SpatialGrid g(16);
    Vector p(16), m(16);
    for (int j = 0; j < 16; ++j) {
        p[j] = Complex(1.0 + 0.1 * j, 0.01 * j);
        m[j] = Complex(2.0, -0.5);
    }
    PolyhomSymbol s(g, 1.0, 4);
    s.add(1.0, p, m);
    s.add(0.0, m, p, true);
    const auto back = symbol_from_json(symbol_to_json(s), g);
    EXPECT_EQ(back.top_order(), 1.0);
    EXPECT_EQ(back.depth(), 4);
    ASSERT_EQ(back.components().size(), 2u);
    EXPECT_EQ((back.coefficient(1.0).first - p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bundle, CacheRoundTrip) {
    const fs::path d = scratch("bundle");
    const auto mc = reduce_to_model(preset_metric("breathing-metric"), SpatialGrid(32));
    ParametrixOptions o;
    o.truncation = 3;
    o.t_max = 0.25;
    o.nodes = 9;
    const auto P = build_parametrix(mc, o);
    for (bool full : {true, false}) {
        write_bundle(d / (full ? "full" : "lean"), P, full);
        const auto Q = read_bundle(d / (full ? "full" : "lean"), mc, o);
        EXPECT_EQ((Q.r - P.r).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_LT((Q.u_plus.back() - P.u_plus.back()).cwiseAbs().maxCoeff(), full ? 0.0 + 1e-300 : 1e-12);
        EXPECT_EQ(Q.truncation, 3);
    }
    {
        std::fstream f(d / "full" / "r.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        f.put('\x01');
    }
    EXPECT_THROW((void)read_bundle(d / "full", mc, o), IoError);
    fs::remove_all(d);
}

TEST(RunLock, ExclusiveOwnership) {
    const fs::path d = scratch("lock");
    {
        RunLock a(d);
        EXPECT_THROW(RunLock b(d), IoError);
    }
    EXPECT_NO_THROW(RunLock c(d));
    fs::remove_all(d);
}
