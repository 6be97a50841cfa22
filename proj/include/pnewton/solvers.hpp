#pragma once

#include "pnewton/subproblem.hpp"

#include <functional>
#include <optional>
#include <string>

namespace pnewton {

struct Proposal {
    Point x_tilde;
    int inner_iters = 0;
};

/// Source of the tentative iterate x~_{t+1}. The metric built at x_t is
/// passed along so a provider can reuse it; it is free to ignore it.
struct DirectionProvider {
    std::string name;
    std::function<Proposal(const ProblemInstance&, const Point& x_t, double r_t, const Metric& H,
                           const SolverConfig&, CertificateMode)>
        propose;
};

/// The inexact subproblem solver.
inline DirectionProvider subproblem_provider() {
    return {"subproblem", [](const ProblemInstance& problem, const Point& x_t, double r_t, const Metric& H,
                             const SolverConfig& cfg, CertificateMode mode) {
                auto res = solve_subproblem(problem, x_t, r_t, H, cfg, mode);
                return Proposal{std::move(res.x_tilde), res.inner_iters};
            }};
}

enum class Termination { ResidualTol, StepZero, OuterBudget, InnerBudgetExhausted };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::ResidualTol: return "ResidualTol";
        case Termination::StepZero: return "StepZero";
        case Termination::OuterBudget: return "OuterBudget";
        case Termination::InnerBudgetExhausted: return "InnerBudgetExhausted";
    }
    return "?";
}

struct RunResult {
    Point final_x;
    IterateTrace trace;
    Termination termination = Termination::OuterBudget;
    double final_r = 0.0;
    std::string diagnostic;
};

/// Largest dimension for which each iteration also records the exact ||H_t||.
inline constexpr Eigen::Index kExactNormMaxDim = 500;

namespace detail {

inline double metric_exact_norm(const Metric& H) {
    const LinearMap Hm = H.matrix();
    if (Hm.isApprox(Hm.transpose(), 1e-14)) {
        Eigen::SelfAdjointEigenSolver<LinearMap> es(Hm, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::BDCSVD<LinearMap> svd(Hm);
    return svd.singularValues()(0);
}

/// Per-step acceptance: returns the next iterate, or nothing when the line
/// search gives up. Fills alpha (and flags) in `row`.
using StepRule = std::function<std::optional<Point>(int t, const Point& x_t, double r_t, const Point& x_tilde,
                                                    const Point& p, const Metric& H, TraceRow& row)>;

class OuterLoop {
public:
    OuterLoop(const ProblemInstance& problem, const SolverConfig& cfg, Algorithm algorithm,
              DirectionProvider provider)
        : problem_(problem), cfg_(cfg), algorithm_(algorithm), provider_(std::move(provider)) {
        validate(cfg_);
        problem_.validate();
    }

    RunResult run(const Point& x0, const StepRule& step) {
        if (x0.size() != problem_.dim) throw std::invalid_argument("x0 has wrong dimension");
        if (!all_finite(x0)) throw std::invalid_argument("x0 must be finite");
        RunResult out;
        out.trace.algorithm = algorithm_;
        const CertificateMode mode = certificate_mode(algorithm_);
        Point x = x0;
        for (int t = 0;; ++t) {
            const double r = residual_fb(problem_, x).r;
            TraceRow row = state_row(t, x, r);
            if (r <= cfg_.r_tol) return finish(out, std::move(x), r, row, Termination::ResidualTol, "");
            if (t >= cfg_.max_outer)
                return finish(out, std::move(x), r, row, Termination::OuterBudget, "outer budget reached");

            const Metric H = build_metric(problem_, x, r, cfg_, t);
            Proposal prop;
            try {
                prop = provider_.propose(problem_, x, r, H, cfg_, mode);
            } catch (const InnerBudgetExhausted& e) {
                return finish(out, std::move(x), r, row, Termination::InnerBudgetExhausted, e.what());
            }
            if (prop.x_tilde.size() != problem_.dim || !all_finite(prop.x_tilde))
                throw std::runtime_error("direction provider '" + provider_.name + "' returned a non-finite point");

            const Point p = prop.x_tilde - x;
            const double pn = p.norm();
            const double subres = subproblem_residual(problem_, x, H, prop.x_tilde).r;
            row.mu = H.mu;
            row.step_norm = pn;
            row.inner_iters = prop.inner_iters;
            row.subres = subres;
            if (!H.psd()) row.flags |= kMetricNotPsd;
            if (subres > certificate_tolerance(cfg_, r, mode)) row.flags |= kCertificateMissed;
            if (problem_.is_regularized()) {
                const auto& reg = problem_.reg();
                const Point g = reg.f_grad(x);
                if (model_value(reg, x, g, H, prop.x_tilde) > model_value(reg, x, g, H, x)) row.flags |= kModelIncrease;
            }
            if (problem_.dim <= kExactNormMaxDim) {
                row.h_norm = metric_exact_norm(H);
                const double lhs = mode == CertificateMode::Optimization ? (1.0 - cfg_.nu) * r : r - subres;
                if (lhs > (*row.h_norm + 2.0) * pn + 1e-10) row.flags |= kStepBoundViolated;
            }

            if (pn == 0.0) {
                return finish(out, std::move(x), r, state_row(t, x, r), Termination::StepZero, "zero step p~_t = 0");
            }
            auto next = step(t, x, r, prop.x_tilde, p, H, row);
            if (!next) {
                TraceRow last = state_row(t, x, r);
                return finish(out, std::move(x), r, last, Termination::StepZero,
                              "line search failed after " + std::to_string(cfg_.max_backtracks) + " reductions at r=" +
                                  std::to_string(r));
            }
            row.unit_step = row.alpha && *row.alpha == 1.0;
            out.trace.rows.push_back(row);
            x = std::move(*next);
        }
    }

private:
    TraceRow state_row(int t, const Point& x, double r) const {
        TraceRow row;
        row.t = t;
        row.r = r;
        if (problem_.is_regularized()) row.F = problem_.reg().objective(x);
        if (problem_.metadata.dist_oracle) row.dist = problem_.metadata.dist_oracle(x);
        return row;
    }

    static RunResult finish(RunResult& out, Point x, double r, TraceRow last, Termination why, std::string diag) {
        out.trace.rows.push_back(std::move(last));
        out.final_x = std::move(x);
        out.final_r = r;
        out.termination = why;
        out.diagnostic = std::move(diag);
        return std::move(out);
    }

    const ProblemInstance& problem_;
    SolverConfig cfg_;
    Algorithm algorithm_;
    DirectionProvider provider_;
};

inline double acceptance_decrease(const SolverConfig& cfg, double alpha, double pn) {
    const double pw = std::pow(pn, 2.0 + cfg.delta);
    const double base = cfg.relaxed_acceptance ? std::min(pn * pn, pw) : pw;
    return cfg.gamma * alpha * alpha * base;
}

}  // namespace detail

/// Pure local scheme: x_{t+1} = x~_{t+1}, unit step, no line search.
inline RunResult run_local(const ProblemInstance& problem, const Point& x0, const SolverConfig& cfg,
                           DirectionProvider provider = subproblem_provider()) {
    detail::OuterLoop loop(problem, cfg, Algorithm::Local, std::move(provider));
    return loop.run(x0, [](int, const Point&, double, const Point& x_tilde, const Point&, const Metric&,
                           TraceRow& row) -> std::optional<Point> {
        row.alpha = 1.0;
        return x_tilde;
    });
}

/// Hybrid residual test plus Armijo backtracking (no monotonicity of F).
inline RunResult run_alg1(const ProblemInstance& problem, const Point& x0, const SolverConfig& cfg,
                          DirectionProvider provider = subproblem_provider()) {
    if (!problem.is_regularized()) throw ConfigError("line search requires objective");
    const auto& reg = problem.reg();
    const double F0 = reg.objective(x0);
    const double c_bar = cfg.c_bar.value_or(F0 + 1.0);
    if (!(c_bar > F0)) throw ConfigError("c_bar must exceed F(x0)");
    double eta = residual_fb(problem, x0).r;

    detail::OuterLoop loop(problem, cfg, Algorithm::Alg1, std::move(provider));
    return loop.run(x0, [&](int t, const Point& x, double, const Point& x_tilde, const Point& p, const Metric& H,
                            TraceRow& row) -> std::optional<Point> {
        if (t > 0) {
            const double r_tilde = residual_fb(problem, x_tilde).r;
            if (r_tilde <= cfg.sigma * eta && reg.objective(x_tilde) <= c_bar) {
                eta = r_tilde;
                row.alpha = 1.0;
                row.eta = eta;
                row.flags |= kHybridStep;
                return x_tilde;
            }
        }
        row.eta = eta;
        const double Fx = *row.F;
        const double pn2 = p.squaredNorm();
        double alpha = 1.0;
        for (int m = 0; m <= cfg.max_backtracks; ++m) {
            Point trial = x + alpha * p;
            if (reg.objective(trial) <= Fx - cfg.gamma * H.mu * alpha * pn2) {
                row.alpha = alpha;
                return trial;
            }
            alpha *= cfg.beta;
        }
        return std::nullopt;
    });
}

/// Strict-decrease line search on the prox-gradient-corrected trial point.
inline RunResult run_alg2(const ProblemInstance& problem, const Point& x0, const SolverConfig& cfg,
                          DirectionProvider provider = subproblem_provider()) {
    if (!problem.is_regularized()) throw ConfigError("line search requires objective");
    const auto& reg = problem.reg();
    if (!(reg.lipschitz_L > 0.0)) throw ConfigError("run_alg2 needs a Lipschitz constant L > 0");

    detail::OuterLoop loop(problem, cfg, Algorithm::Alg2, std::move(provider));
    return loop.run(x0, [&](int, const Point& x, double, const Point&, const Point& p, const Metric&,
                            TraceRow& row) -> std::optional<Point> {
        const double Fx = *row.F;
        const double pn = p.norm();
        double alpha = 1.0;
        for (int m = 0; m <= cfg.max_backtracks; ++m) {
            const Point y = x + alpha * p;
            Point xbar = prox_gradient(reg, y).xbar;
            const double Fbar = reg.objective(xbar);
            if (Fbar <= Fx - detail::acceptance_decrease(cfg, alpha, pn) && Fbar < Fx) {
                row.alpha = alpha;
                return xbar;
            }
            alpha *= cfg.beta;
        }
        return std::nullopt;
    });
}

/// Smooth case (Psi = 0): the same acceptance test applied to x_t + alpha p~_t.
inline RunResult run_alg3(const ProblemInstance& problem, const Point& x0, const SolverConfig& cfg,
                          DirectionProvider provider = subproblem_provider()) {
    if (!problem.is_regularized()) throw ConfigError("line search requires objective");
    const auto& reg = problem.reg();
    if (!reg.psi_is_zero) throw ConfigError("run_alg3 requires Psi = 0");

    detail::OuterLoop loop(problem, cfg, Algorithm::Alg3, std::move(provider));
    return loop.run(x0, [&](int, const Point& x, double, const Point&, const Point& p, const Metric&,
                            TraceRow& row) -> std::optional<Point> {
        const double Fx = *row.F;
        const double pn = p.norm();
        double alpha = 1.0;
        for (int m = 0; m <= cfg.max_backtracks; ++m) {
            Point trial = x + alpha * p;
            const double Ft = reg.objective(trial);
            if (Ft <= Fx - detail::acceptance_decrease(cfg, alpha, pn) && Ft < Fx) {
                row.alpha = alpha;
                return trial;
            }
            alpha *= cfg.beta;
        }
        return std::nullopt;
    });
}

inline RunResult run(Algorithm algorithm, const ProblemInstance& problem, const Point& x0, const SolverConfig& cfg,
                     DirectionProvider provider = subproblem_provider()) {
    switch (algorithm) {
        case Algorithm::Local: return run_local(problem, x0, cfg, std::move(provider));
        case Algorithm::Alg1: return run_alg1(problem, x0, cfg, std::move(provider));
        case Algorithm::Alg2: return run_alg2(problem, x0, cfg, std::move(provider));
        case Algorithm::Alg3: return run_alg3(problem, x0, cfg, std::move(provider));
    }
    throw ConfigError("unknown algorithm");
}

}  // namespace pnewton
