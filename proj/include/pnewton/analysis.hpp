#pragma once

#include "pnewton/problems.hpp"
#include "pnewton/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace pnewton {

// ---------------------------------------------------------------------------
// Parameter regions for superlinear rates.

/// A strict inequality lhs > 1 counts as satisfied only when lhs - 1 exceeds
/// this margin, so decimal inputs that sit exactly on a boundary (e.g.
/// (q + pq - rho)(1 + p) = 1 for q = 0.55, rho = 0.6) are not pushed across
/// it by binary rounding.
inline constexpr double kStrictMargin = 1e-12;

struct RegionReport {
    double p = 1.0;
    double q = 1.0;
    double rho = 1.0;
    bool feasible_Q = false;   // Q-superlinear r_t and d_t
    bool feasible_R = false;   // Q-superlinear r_t, R-superlinear d_t
    std::optional<double> s;
    std::optional<double> s_bar;

    /// delta > 1/q - 1 and 2 + delta >= (1 + p)(1 + q).
    bool delta_min_ok(double delta) const {
        return delta > 1.0 / q - 1.0 && 2.0 + delta >= (1.0 + p) * (1.0 + q);
    }
};

inline RegionReport check_region(double p, double q, double rho) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q must lie in (0, 1]");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be >= 0");
    auto gt1 = [](double lhs) { return lhs - 1.0 > kStrictMargin; };

    RegionReport rep;
    rep.p = p;
    rep.q = q;
    rep.rho = rho;
    const double t_rho = (1.0 + rho) * q;
    const double t_p = (1.0 + p) * q;
    const double t_mix = (q + p * q - rho) * (1.0 + p);
    const double t_sum = rho + q;

    rep.feasible_Q = gt1(t_rho) && gt1(t_p) && gt1(t_mix);
    rep.feasible_R = gt1(t_p) && gt1(t_mix) && gt1(t_sum) && rho > 0.0;
    if (rep.feasible_Q) rep.s = std::min({t_rho, t_p, t_mix}) - 1.0;
    if (rep.feasible_R) rep.s_bar = std::min({t_p, t_mix, t_sum, 1.0 + rho}) - 1.0;
    return rep;
}

inline nlohmann::json to_json(const RegionReport& rep, std::optional<double> delta = std::nullopt) {
    nlohmann::json j;
    j["p"] = rep.p;
    j["q"] = rep.q;
    j["rho"] = rep.rho;
    j["feasible_Q"] = rep.feasible_Q;
    j["feasible_R"] = rep.feasible_R;
    j["s"] = rep.s ? nlohmann::json(*rep.s) : nlohmann::json(nullptr);
    j["s_bar"] = rep.s_bar ? nlohmann::json(*rep.s_bar) : nlohmann::json(nullptr);
    if (delta) {
        j["delta"] = *delta;
        j["delta_min_ok"] = rep.delta_min_ok(*delta);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Empirical convergence order.

class RateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RateEstimate {
    double q_order = 0.0;
    int t_lo = 0;
    int t_hi = 0;
    std::size_t points = 0;
    double residual_of_fit = 0.0;
    std::vector<double> ratio_sequence;
};

inline constexpr double kDefaultRateFloor = 1e-11;
inline constexpr double kDefaultRateCeiling = 1e-2;

/// Least-squares slope of log r_{t+1} against log r_t over consecutive rows
/// with both residuals in (floor, ceiling].
inline RateEstimate estimate_rate(const IterateTrace& trace, double floor = kDefaultRateFloor,
                                  double ceiling = kDefaultRateCeiling) {
    const auto& rows = trace.rows;
    const auto above = std::count_if(rows.begin(), rows.end(), [&](const TraceRow& r) { return r.r > floor; });
    if (above < 5)
        throw RateError("insufficient points: " + std::to_string(above) + " rows above the floor, need 5");

    RateEstimate est;
    std::vector<double> xs, ys;
    std::vector<std::size_t> in_window;
    auto inside = [&](double r) { return r > floor && r <= ceiling; };
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (rows[i].r > floor && rows[i].r > 0.0) est.ratio_sequence.push_back(rows[i + 1].r / rows[i].r);
        if (inside(rows[i].r) && inside(rows[i + 1].r)) {
            xs.push_back(std::log(rows[i].r));
            ys.push_back(std::log(rows[i + 1].r));
            if (in_window.empty() || in_window.back() != i) in_window.push_back(i);
            in_window.push_back(i + 1);
        }
    }
    est.points = in_window.size();
    if (xs.size() < 2)
        throw RateError("insufficient points: " + std::to_string(est.points) + " rows in the fit window, need 3");

    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw RateError("degenerate fit window: all residuals equal");
    est.q_order = sxy / sxx;
    const double intercept = my - est.q_order * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (intercept + est.q_order * xs[i]);
        ss += e * e;
    }
    est.residual_of_fit = std::sqrt(ss / n);
    est.t_lo = rows[in_window.front()].t;
    est.t_hi = rows[in_window.back()].t;
    return est;
}

inline nlohmann::json to_json(const RateEstimate& est) {
    return {{"q_order", est.q_order},
            {"window", {est.t_lo, est.t_hi}},
            {"points", est.points},
            {"residual_of_fit", est.residual_of_fit},
            {"ratio_sequence", est.ratio_sequence}};
}

// ---------------------------------------------------------------------------
// Post-hoc invariant audit.

struct Violation {
    std::string rule;
    int row = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs for "lhs <= rhs" rules; negative when violated
};

inline nlohmann::json to_json(const Violation& v) {
    return {{"rule", v.rule}, {"row", v.row}, {"lhs", v.lhs}, {"rhs", v.rhs}, {"margin", v.margin}};
}

inline nlohmann::json to_json(const std::vector<Violation>& vs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : vs) arr.push_back(to_json(v));
    return arr;
}

/// Re-checks a trace against the rules its algorithm guarantees. Rows with
/// in-memory flags (traces produced in-process) are also checked for metric
/// positivity, model decrease and the r_t <= (||H_t|| + 2)||p_t|| bound.
inline std::vector<Violation> audit_trace(const IterateTrace& trace, const ProblemInstance& problem,
                                          const SolverConfig& cfg) {
    std::vector<Violation> out;
    const auto& rows = trace.rows;
    const bool line_search = trace.algorithm == Algorithm::Alg2 || trace.algorithm == Algorithm::Alg3;
    const CertificateMode mode = certificate_mode(trace.algorithm);
    const double L = problem.lipschitz();
    std::optional<double> last_eta;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TraceRow& row = rows[i];
        const int idx = static_cast<int>(i);
        if (i > 0 && row.t <= rows[i - 1].t)
            out.push_back({"TraceOrder", idx, double(row.t), double(rows[i - 1].t), double(row.t - rows[i - 1].t)});

        if (row.subres) {
            const double tol = certificate_tolerance(cfg, row.r, mode);
            if (!(*row.subres <= tol)) out.push_back({"Certificate", idx, *row.subres, tol, tol - *row.subres});
        }
        if (line_search && row.alpha && row.mu && row.step_norm && *row.alpha != 1.0) {
            const double floor =
                cfg.beta * *row.mu / (L + 2.0 * cfg.gamma * std::pow(*row.step_norm, cfg.delta));
            if (!(*row.alpha >= floor)) out.push_back({"StepFloor", idx, floor, *row.alpha, *row.alpha - floor});
        }
        if (line_search && i > 0 && row.F && rows[i - 1].F) {
            if (!(*row.F < *rows[i - 1].F))
                out.push_back({"StrictDecrease", idx, *row.F, *rows[i - 1].F, *rows[i - 1].F - *row.F});
        }
        if (trace.algorithm == Algorithm::Alg1 && row.eta) {
            if (last_eta && !(*row.eta <= *last_eta))
                out.push_back({"EtaMonotone", idx, *row.eta, *last_eta, *last_eta - *row.eta});
            last_eta = row.eta;
        }
        if (row.flags & kMetricNotPsd) out.push_back({"MetricPsd", idx, 1.0, 0.0, -1.0});
        if ((row.flags & kModelIncrease) && mode == CertificateMode::Optimization)
            out.push_back({"ModelDecrease", idx, 1.0, 0.0, -1.0});
        if (row.flags & kStepBoundViolated) {
            const double lhs = mode == CertificateMode::Optimization ? (1.0 - cfg.nu) * row.r
                                                                      : row.r - row.subres.value_or(0.0);
            const double rhs = (row.h_norm.value_or(0.0) + 2.0) * row.step_norm.value_or(0.0);
            out.push_back({"StepBound", idx, lhs, rhs, rhs - lhs});
        }
    }
    return out;
}

}  // namespace pnewton
