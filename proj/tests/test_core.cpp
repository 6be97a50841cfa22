#include "pnewton/trace_io.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace pnewton;

TEST(MakeConfig, PowerRuleCopiesRho) {
    ConfigParams p;
    p.rho = 0.5;
    const SolverConfig cfg = make_config(p);
    EXPECT_EQ(cfg.rho, 0.5);
    EXPECT_EQ(cfg.theta, 0.5);
    EXPECT_EQ(cfg.damping_mode, DampingMode::Power);
}

TEST(MakeConfig, RejectsRhoAboveOne) {
    ConfigParams p;
    p.rho = 1.5;
    EXPECT_THROW(make_config(p), ConfigError);
}

TEST(MakeConfig, RejectsNuOne) {
    ConfigParams p;
    p.nu = 1.0;
    EXPECT_THROW(make_config(p), ConfigError);
}

TEST(MakeConfig, ModulusModeNeedsModulus) {
    ConfigParams p;
    p.damping_mode = DampingMode::Modulus;
    EXPECT_THROW(make_config(p), ConfigError);
    p.modulus = log_modulus();
    EXPECT_NO_THROW(make_config(p));
}

// Range checks reject exactly the values outside the admissible intervals.
TEST(MakeConfig, RangeChecksMatchIntervals) {
    oracle::Gen gen(11);
    for (int i = 0; i < 500; ++i) {
        const double rho = gen.uniform(-0.5, 1.5);
        const double nu = gen.uniform(-0.5, 1.5);
        const double beta = gen.uniform(-0.5, 1.5);
        const double gamma = gen.uniform(-0.5, 1.5);
        const double sigma = gen.uniform(-0.5, 1.5);
        ConfigParams p;
        p.rho = rho;
        p.nu = nu;
        p.beta = beta;
        p.gamma = gamma;
        p.sigma = sigma;
        const bool ok = rho > 0 && rho <= 1 && nu >= 0 && nu < 1 && beta > 0 && beta < 1 && gamma > 0 &&
                        gamma < 1 && sigma > 0 && sigma < 1;
        if (ok) EXPECT_NO_THROW(make_config(p));
        else EXPECT_THROW(make_config(p), ConfigError);
    }
    for (double rho : {0.0, 1.0, 1e-9, 1.0 + 1e-12}) {
        ConfigParams p;
        p.rho = rho;
        if (rho > 0 && rho <= 1) EXPECT_NO_THROW(make_config(p));
        else EXPECT_THROW(make_config(p), ConfigError);
    }
    ConfigParams p;
    p.rho = 0.5;
    p.theta = 0.4;
    EXPECT_THROW(make_config(p), ConfigError);
}

TEST(Modulus, LogModulusProperties) {
    const Modulus w = log_modulus();
    EXPECT_EQ(w(0.0), 0.0);
    EXPECT_NEAR(w(1e-4), 1.0 / (1.0 + std::log(1.0 + 1e4)), 1e-15);
    double prev = 0.0;
    for (double s = 1e-300; s < 1e3; s *= 3.0) {
        EXPECT_GE(w(s), prev);
        prev = w(s);
    }
}

TEST(Modulus, RejectsNonModulus) {
    EXPECT_THROW(validate_modulus(Modulus{"square", [](double s) { return s * s; }}), ConfigError);
    EXPECT_THROW(validate_modulus(Modulus{"shifted", [](double s) { return s + 1.0; }}), ConfigError);
    EXPECT_THROW(modulus_by_name("power:2"), ConfigError);
    EXPECT_THROW(modulus_by_name("cubic"), ConfigError);
    EXPECT_NO_THROW(modulus_by_name("power:0.5"));
}

TEST(Algorithm, NamesRoundTrip) {
    for (Algorithm a : {Algorithm::Local, Algorithm::Alg1, Algorithm::Alg2, Algorithm::Alg3})
        EXPECT_EQ(algorithm_from_string(to_string(a)), a);
    EXPECT_THROW(algorithm_from_string("alg4"), ConfigError);
}

namespace {

double random_double(oracle::Gen& gen) {
    // Mix of ordinary values, subnormals and extremes to stress shortest formatting.
    switch (gen.integer(0, 4)) {
        case 0: return gen.uniform(-1.0, 1.0);
        case 1: return std::ldexp(gen.uniform(0.5, 1.0), gen.integer(-1070, 1020));
        case 2: return std::numeric_limits<double>::denorm_min() * gen.integer(1, 1000);
        case 3: return -std::ldexp(gen.uniform(0.5, 1.0), gen.integer(-60, 60));
        default: return 0.1 * gen.integer(0, 30);
    }
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool same_bits(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || same_bits(*a, *b);
}

}  // namespace

TEST(TraceCsv, RoundTripIsBitIdentical) {
    oracle::Gen gen(5);
    for (int rep = 0; rep < 50; ++rep) {
        IterateTrace trace;
        const int rows = gen.integer(1, 30);
        for (int i = 0; i < rows; ++i) {
            TraceRow row;
            row.t = i * gen.integer(1, 3) + (i > 0 ? trace.rows.back().t + 1 : 0);
            row.r = std::abs(random_double(gen));
            auto maybe = [&]() -> std::optional<double> {
                if (gen.integer(0, 3) == 0) return std::nullopt;
                return random_double(gen);
            };
            row.F = maybe();
            row.dist = maybe();
            row.alpha = maybe();
            row.mu = maybe();
            row.step_norm = maybe();
            if (gen.integer(0, 1)) row.inner_iters = gen.integer(0, 100000);
            row.subres = maybe();
            if (gen.integer(0, 2)) row.unit_step = gen.integer(0, 1) == 1;
            trace.rows.push_back(row);
        }
        const std::string text = format_trace_csv(trace);
        const IterateTrace back = parse_trace_csv(text);
        ASSERT_EQ(back.rows.size(), trace.rows.size());
        for (std::size_t i = 0; i < trace.rows.size(); ++i) {
            const auto& a = trace.rows[i];
            const auto& b = back.rows[i];
            EXPECT_EQ(a.t, b.t);
            EXPECT_TRUE(same_bits(a.r, b.r));
            EXPECT_TRUE(same_bits(a.F, b.F));
            EXPECT_TRUE(same_bits(a.dist, b.dist));
            EXPECT_TRUE(same_bits(a.alpha, b.alpha));
            EXPECT_TRUE(same_bits(a.mu, b.mu));
            EXPECT_TRUE(same_bits(a.step_norm, b.step_norm));
            EXPECT_EQ(a.inner_iters, b.inner_iters);
            EXPECT_TRUE(same_bits(a.subres, b.subres));
            EXPECT_EQ(a.unit_step, b.unit_step);
        }
        EXPECT_EQ(format_trace_csv(back), text);
    }
}

TEST(TraceCsv, HeaderAndLineEndings) {
    IterateTrace trace;
    TraceRow row;
    row.r = 0.5;
    trace.rows.push_back(row);
    const std::string text = format_trace_csv(trace);
    EXPECT_EQ(text, std::string(kTraceHeader) + "\n0,0.5,,,,,,,,\n");
    EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(TraceCsv, RejectsMalformedInput) {
    const std::string header(kTraceHeader);
    EXPECT_THROW(parse_trace_csv(""), TraceFormatError);
    EXPECT_THROW(parse_trace_csv("t,r\n0,1\n"), TraceFormatError);
    EXPECT_THROW(parse_trace_csv(header + "\n0,1,2,,,,,,,1\n1,0.5,1"), TraceFormatError);  // truncated
    EXPECT_THROW(parse_trace_csv(header + "\n0,1,,,,,,,\n"), TraceFormatError);               // 9 fields
    EXPECT_THROW(parse_trace_csv(header + "\n0,abc,,,,,,,,\n"), TraceFormatError);
    EXPECT_THROW(parse_trace_csv(header + "\n0,1,,,,,,,,2\n"), TraceFormatError);
    EXPECT_THROW(parse_trace_csv(header + "\n1,1,,,,,,,,\n1,1,,,,,,,,\n"), TraceFormatError);
    EXPECT_NO_THROW(parse_trace_csv(header + "\n"));
}

TEST(TraceCsv, FileRoundTrip) {
    IterateTrace trace;
    TraceRow row;
    row.r = 1.0 / 3.0;
    row.F = 2.0 / 3.0;
    trace.rows.push_back(row);
    const auto path = (std::filesystem::temp_directory_path() / "pnewton_core_roundtrip.csv").string();
    write_trace_csv(trace, path);
    EXPECT_EQ(format_trace_csv(read_trace_csv(path)), format_trace_csv(trace));
    std::filesystem::remove(path);
    EXPECT_THROW(read_trace_csv(path), TraceFormatError);
}
