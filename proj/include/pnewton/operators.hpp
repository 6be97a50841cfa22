#pragma once

#include "pnewton/core.hpp"

#include <random>

namespace pnewton {

struct Residual {
    Point R;
    double r = 0.0;
};

/// Forward-backward residual R(x) = x - (Id + B)^{-1}(x - A(x)).
inline Residual residual_fb(const ProblemInstance& problem, const Point& x) {
    Residual out;
    out.R = x - problem.resolvent(1.0, x - problem.forward(x));
    out.r = out.R.norm();
    return out;
}

/// Damped metric H_t = mu*Id + J_t.
struct Metric {
    double mu = 0.0;
    LinearMap J;
    double norm_bound = 0.0;  // >= ||H_t||, from power iteration
    double min_sym_eig = 0.0; // smallest eigenvalue of (J + J^T)/2

    Point apply(const Point& v) const { return mu * v + J * v; }

    LinearMap matrix() const {
        LinearMap H = J;
        H.diagonal().array() += mu;
        return H;
    }

    bool psd(double tol = 1e-10) const { return min_sym_eig >= -tol; }

    /// Exact spectral norm; O(n^3), meant for audits on small instances.
    double exact_norm() const {
        Eigen::JacobiSVD<LinearMap> svd(matrix());
        return svd.singularValues()(0);
    }
};

/// Subproblem residual hatR_t(x) = x - (Id + B)^{-1}((Id - H)x + (H - A)x_t),
/// with A(x_t) supplied by the caller.
inline Residual subproblem_residual(const ProblemInstance& problem, const Point& x_t, const Point& A_xt,
                                    const Metric& H, const Point& x) {
    Residual out;
    out.R = x - problem.resolvent(1.0, x - A_xt - H.apply(x - x_t));
    out.r = out.R.norm();
    return out;
}

inline Residual subproblem_residual(const ProblemInstance& problem, const Point& x_t, const Metric& H,
                                    const Point& x) {
    return subproblem_residual(problem, x_t, problem.forward(x_t), H, x);
}

struct ProxGradient {
    Point G;
    Point xbar;
};

/// G_L(x) = L (x - prox_{Psi/L}(x - grad f(x)/L)); xbar = x - G/L.
inline ProxGradient prox_gradient(const RegularizedProblem& problem, const Point& x, double L) {
    if (!(L > 0.0)) throw ConfigError("prox_gradient needs L > 0");
    ProxGradient out;
    out.xbar = problem.psi_prox(1.0 / L, x - problem.f_grad(x) / L);
    out.G = L * (x - out.xbar);
    return out;
}

inline ProxGradient prox_gradient(const RegularizedProblem& problem, const Point& x) {
    return prox_gradient(problem, x, problem.lipschitz_L);
}

inline double damping(const SolverConfig& cfg, double r) {
    if (cfg.damping_mode == DampingMode::Modulus) {
        if (!cfg.modulus) throw ConfigError("modulus damping mode requires a modulus");
        return cfg.c * (*cfg.modulus)(r);
    }
    return cfg.c * std::pow(r, cfg.rho);
}

namespace detail {

/// sqrt of the dominant eigenvalue of H^T H after `iters` power steps.
inline double power_norm_estimate(const LinearMap& H, int iters, std::uint64_t seed) {
    const auto n = H.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Point v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    v.normalize();
    double est = 0.0;
    for (int k = 0; k < iters; ++k) {
        Point w = H.transpose() * (H * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        est = std::sqrt(nw);
        v = w / nw;
    }
    return est;
}

/// PSD perturbation of spectral norm `size`, deterministic in (seed, t).
inline LinearMap psd_noise(Eigen::Index n, double size, std::uint64_t seed, int t) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(t));
    std::normal_distribution<double> normal;
    LinearMap G(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) G(i, j) = normal(rng);
    LinearMap W = G * G.transpose();
    Eigen::SelfAdjointEigenSolver<LinearMap> es(W, Eigen::EigenvaluesOnly);
    return (size / es.eigenvalues().maxCoeff()) * W;
}

}  // namespace detail

/// Builds H_t at x_t. `t` only seeds the optional Jacobian perturbation.
inline Metric build_metric(const ProblemInstance& problem, const Point& x_t, double r_t, const SolverConfig& cfg,
                           int t = 0) {
    if (!(r_t > 0.0)) throw std::invalid_argument("build_metric requires r_t > 0");
    Metric H;
    H.mu = damping(cfg, r_t);
    H.J = problem.jacobian(x_t);
    if (problem.is_regularized()) H.J = (0.5 * (H.J + H.J.transpose())).eval();
    if (cfg.jacobian_noise > 0.0)
        H.J += detail::psd_noise(H.J.rows(), cfg.jacobian_noise * std::pow(r_t, cfg.theta), cfg.noise_seed, t);

    LinearMap sym = 0.5 * (H.J + H.J.transpose());
    Eigen::SelfAdjointEigenSolver<LinearMap> es(sym, Eigen::EigenvaluesOnly);
    H.min_sym_eig = es.eigenvalues().minCoeff();
    H.norm_bound = 1.1 * detail::power_norm_estimate(H.matrix(), 20, 0x5eed);
    if (!(H.norm_bound > 0.0)) H.norm_bound = std::max(H.mu, 1e-300);
    return H;
}

}  // namespace pnewton
