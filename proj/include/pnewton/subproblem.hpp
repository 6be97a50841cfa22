#pragma once

#include "pnewton/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pnewton {

/// Which inexactness rule applies: the optimization rule caps the tolerance
/// at nu * r_t as well, the generalized-equation rule does not.
enum class CertificateMode { Optimization, GeneralizedEquation };

inline CertificateMode certificate_mode(Algorithm a) {
    return a == Algorithm::Local ? CertificateMode::GeneralizedEquation : CertificateMode::Optimization;
}

/// Tolerance on hatr_t(x_{t+1}) for an outer iterate with residual r_t.
inline double certificate_tolerance(const SolverConfig& cfg, double r_t, CertificateMode mode) {
    double tol = 0.0;
    if (cfg.nu == 0.0) {
        tol = std::max(1e-14, 1e-14 * r_t);
    } else if (cfg.damping_mode == DampingMode::Modulus) {
        if (!cfg.modulus) throw ConfigError("modulus damping mode requires a modulus");
        tol = cfg.nu * (*cfg.modulus)(r_t) * r_t;
    } else if (mode == CertificateMode::Optimization) {
        tol = cfg.nu * std::min(std::pow(r_t, 1.0 + cfg.rho), r_t);
    } else {
        tol = cfg.nu * std::pow(r_t, 1.0 + cfg.rho);
    }
    return std::max(tol, cfg.subres_floor);
}

/// q_t(x) = <g_t, x - x_t> + 1/2 <H(x - x_t), x - x_t> + Psi(x).
inline double model_value(const RegularizedProblem& problem, const Point& x_t, const Point& g_t, const Metric& H,
                          const Point& x) {
    const Point d = x - x_t;
    return g_t.dot(d) + 0.5 * H.apply(d).dot(d) + problem.psi_value(x);
}

struct SubproblemResult {
    Point x_tilde;
    double hatr = 0.0;
    bool model_decrease_ok = true;
    int inner_iters = 0;
    double tol_used = 0.0;
    bool norm_bound_raised = false;
    std::vector<double> hatr_history;  // hatr every 5 inner iterations
};

class InnerBudgetExhausted : public std::runtime_error {
public:
    InnerBudgetExhausted(Point best, double best_hatr, double tol)
        : std::runtime_error("inner budget exhausted: hatr " + std::to_string(best_hatr) + " > tol " +
                             std::to_string(tol)),
          best_iterate(std::move(best)),
          hatr(best_hatr),
          tol_used(tol) {}

    Point best_iterate;
    double hatr;
    double tol_used;
};

namespace detail {

struct InnerState {
    const ProblemInstance& problem;
    const Point& x_t;
    const Point& A_xt;
    const Metric& H;
    double tol;
    bool optimization;
    double q0 = 0.0;

    Point best;
    double best_hatr = std::numeric_limits<double>::infinity();
    SubproblemResult result;

    double model(const Point& z) const {
        return model_value(problem.reg(), x_t, A_xt, H, z);
    }

    /// Records a candidate; true when it satisfies the certificate.
    bool check(const Point& z, int iter) {
        const double hr = subproblem_residual(problem, x_t, A_xt, H, z).r;
        if (iter % 5 == 0) result.hatr_history.push_back(hr);
        const bool model_ok = !optimization || model(z) <= q0;
        if (model_ok && hr < best_hatr) {
            best_hatr = hr;
            best = z;
        }
        if (model_ok && hr <= tol) {
            result.x_tilde = z;
            result.hatr = hr;
            result.model_decrease_ok = model_ok;
            result.inner_iters = iter;
            result.tol_used = tol;
            return true;
        }
        return false;
    }
};

inline Point subproblem_operator(const Point& A_xt, const Metric& H, const Point& x_t, const Point& z) {
    return A_xt + H.apply(z - x_t);
}

}  // namespace detail

/// Inexactly solves 0 in B(z) + A(x_t) + H(z - x_t), warm-started at x_t,
/// until hatr_t(z) <= tol (and q_t(z) <= q_t(x_t) in optimization mode).
inline SubproblemResult solve_subproblem(const ProblemInstance& problem, const Point& x_t, double r_t,
                                         const Metric& H, const SolverConfig& cfg, CertificateMode mode) {
    if (!(r_t > 0.0)) throw std::invalid_argument("solve_subproblem requires r_t > 0");
    const Point A_xt = problem.forward(x_t);
    const double tol = certificate_tolerance(cfg, r_t, mode);
    const bool optimization = problem.is_regularized();

    detail::InnerState st{problem, x_t, A_xt, H, tol, optimization, 0.0, Point(), std::numeric_limits<double>::infinity(), {}};
    if (optimization) st.q0 = st.model(x_t);
    if (st.check(x_t, 0)) return st.result;

    InnerMethod method = cfg.inner_method;
    if (method == InnerMethod::Auto)
        method = optimization ? InnerMethod::Accelerated : InnerMethod::ForwardBackwardForward;
    if (method == InnerMethod::Accelerated && !optimization)
        throw ConfigError("accelerated inner method needs an objective");

    double lip = H.norm_bound;
    Point z = x_t;

    if (method == InnerMethod::ForwardBackward) {
        for (int k = 1; k <= cfg.max_inner; ++k) {
            const double tau = 1.0 / lip;
            z = problem.resolvent(tau, z - tau * detail::subproblem_operator(A_xt, H, x_t, z));
            if (st.check(z, k)) {
                st.result.norm_bound_raised = lip != H.norm_bound;
                return st.result;
            }
        }
    } else if (method == InnerMethod::ForwardBackwardForward) {
        // Tseng's splitting; converges for non-symmetric monotone H when tau < 1/||H||.
        Point Fz = detail::subproblem_operator(A_xt, H, x_t, z);
        for (int k = 1; k <= cfg.max_inner; ++k) {
            const double tau = 0.9 / lip;
            Point y = problem.resolvent(tau, z - tau * Fz);
            Point Fy = detail::subproblem_operator(A_xt, H, x_t, y);
            if (st.check(y, k)) {
                st.result.norm_bound_raised = lip != H.norm_bound;
                return st.result;
            }
            z = y - tau * (Fy - Fz);
            Fz = detail::subproblem_operator(A_xt, H, x_t, z);
        }
    } else {
        // Accelerated proximal gradient on q_t with function-value restart.
        const auto& reg = problem.reg();
        Point y = z;
        double tk = 1.0;
        double qz = st.q0;
        auto prox_step = [&](const Point& from) {
            const double tau = 1.0 / lip;
            return reg.psi_prox(tau, from - tau * detail::subproblem_operator(A_xt, H, x_t, from));
        };
        for (int k = 1; k <= cfg.max_inner; ++k) {
            Point zn = prox_step(y);
            double qn = st.model(zn);
            if (qn > qz) {
                zn = prox_step(z);
                qn = st.model(zn);
                tk = 1.0;
                y = zn;
                if (qn > qz + 1e-10 * std::max(1.0, std::abs(qz))) {
                    lip *= 2.0;  // a plain step must not increase q_t
                    continue;
                }
            } else {
                const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
                y = zn + ((tk - 1.0) / tn) * (zn - z);
                tk = tn;
            }
            z = std::move(zn);
            qz = qn;
            if (st.check(z, k)) {
                st.result.norm_bound_raised = lip != H.norm_bound;
                return st.result;
            }
        }
    }
    throw InnerBudgetExhausted(st.best.size() ? st.best : x_t, st.best_hatr, tol);
}

}  // namespace pnewton
