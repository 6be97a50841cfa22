#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pnewton {

using Point = Eigen::VectorXd;
using LinearMap = Eigen::MatrixXd;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Point& x) { return x.allFinite(); }

/// The single-valued map A with its Jacobian.
struct SmoothMap {
    std::function<Point(const Point&)> eval;
    std::function<LinearMap(const Point&)> jacobian;
    double lipschitz_bound = 1.0;
};

/// B, represented only through its resolvent (Id + tau*B)^{-1}.
struct MonotoneOperator {
    std::function<Point(double, const Point&)> resolvent;
};

/// F = f + Psi. psi_prox(tau, z) is prox_{tau*Psi}(z).
struct RegularizedProblem {
    std::function<double(const Point&)> f_value;
    std::function<Point(const Point&)> f_grad;
    std::function<LinearMap(const Point&)> f_hess;  // may be empty
    std::function<double(const Point&)> psi_value;
    std::function<Point(double, const Point&)> psi_prox;
    double lipschitz_L = 1.0;
    bool psi_is_zero = false;

    double objective(const Point& x) const { return f_value(x) + psi_value(x); }
};

struct ProblemMetadata {
    std::optional<double> holder_p;
    std::optional<double> holder_zeta;
    std::optional<double> eb_q;
    std::optional<double> eb_kappa;
    std::function<double(const Point&)> dist_oracle;  // empty when unknown
    std::optional<double> f_star;
    std::optional<Point> reference_solution;
};

enum class ProblemKind { Regularized, GeneralizedEquation };

/// Either (f, Psi) or (A, B). The solver-facing accessors below expose both
/// through the common A/B view: A = grad f, resolvent of B = prox of Psi.
struct ProblemInstance {
    ProblemKind kind = ProblemKind::Regularized;
    std::optional<RegularizedProblem> regularized;
    std::optional<SmoothMap> ge_map;
    std::optional<MonotoneOperator> ge_operator;
    ProblemMetadata metadata;
    std::string name;
    int dim = 0;
    Point default_x0;

    bool is_regularized() const { return kind == ProblemKind::Regularized; }

    const RegularizedProblem& reg() const {
        if (!regularized) throw ProblemError("problem '" + name + "' has no objective");
        return *regularized;
    }

    Point forward(const Point& x) const {
        return is_regularized() ? regularized->f_grad(x) : ge_map->eval(x);
    }

    LinearMap jacobian(const Point& x) const {
        if (is_regularized()) {
            if (!regularized->f_hess) throw ProblemError("problem '" + name + "' has no Hessian");
            return regularized->f_hess(x);
        }
        return ge_map->jacobian(x);
    }

    bool has_jacobian() const {
        return is_regularized() ? static_cast<bool>(regularized->f_hess)
                                : static_cast<bool>(ge_map->jacobian);
    }

    Point resolvent(double tau, const Point& z) const {
        return is_regularized() ? regularized->psi_prox(tau, z) : ge_operator->resolvent(tau, z);
    }

    double lipschitz() const {
        return is_regularized() ? regularized->lipschitz_L : ge_map->lipschitz_bound;
    }

    /// Throws unless exactly the members matching `kind` are populated.
    void validate() const {
        const bool reg = regularized.has_value();
        const bool ge = ge_map.has_value() && ge_operator.has_value();
        if (kind == ProblemKind::Regularized && (!reg || ge_map || ge_operator))
            throw ProblemError("regularized problem must carry only (f, Psi)");
        if (kind == ProblemKind::GeneralizedEquation && (!ge || reg))
            throw ProblemError("generalized equation must carry only (A, B)");
        if (dim < 1) throw ProblemError("problem dimension must be >= 1");
    }
};

enum class DampingMode { Power, Modulus };

/// A modulus of continuity omega with omega(0) = 0.
struct Modulus {
    std::string name;
    std::function<double(double)> fn;

    double operator()(double s) const { return fn(s); }
};

/// Grid check of the properties a damping modulus must have: omega(0) = 0,
/// nondecreasing, and omega(a + b) <= omega(a) + omega(b).
inline void validate_modulus(const Modulus& m) {
    if (!m.fn) throw ConfigError("modulus '" + m.name + "' has no function");
    if (std::abs(m(0.0)) > 1e-15) throw ConfigError("modulus '" + m.name + "' must vanish at 0");
    std::vector<double> grid{0.0};
    for (int k = -16; k <= 2; ++k)
        for (double mant : {1.0, 2.0, 5.0}) grid.push_back(mant * std::pow(10.0, k));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (m(grid[i]) < m(grid[i - 1]) - 1e-15)
            throw ConfigError("modulus '" + m.name + "' is not nondecreasing");
    }
    for (double a : grid) {
        for (double b : grid) {
            const double lhs = m(a + b);
            const double rhs = m(a) + m(b);
            if (lhs > rhs * (1.0 + 1e-12) + 1e-15)
                throw ConfigError("modulus '" + m.name + "' is not subadditive");
        }
    }
}

/// omega(s) = s^a, a in (0, 1].
inline Modulus power_modulus(double a) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("power modulus exponent must lie in (0, 1]");
    Modulus m{"power:" + std::to_string(a), [a](double s) { return s <= 0.0 ? 0.0 : std::pow(s, a); }};
    validate_modulus(m);
    return m;
}

/// omega(s) = 1 / (1 + ln(1 + 1/s)), extended by omega(0) = 0.
inline Modulus log_modulus() {
    Modulus m{"log", [](double s) { return s <= 0.0 ? 0.0 : 1.0 / (1.0 + std::log1p(1.0 / s)); }};
    validate_modulus(m);
    return m;
}

inline Modulus modulus_by_name(const std::string& name) {
    if (name == "log") return log_modulus();
    if (name.rfind("power:", 0) == 0) {
        try {
            return power_modulus(std::stod(name.substr(6)));
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad power modulus '" + name + "'");
        }
    }
    throw ConfigError("unknown modulus '" + name + "'");
}

enum class InnerMethod { Auto, ForwardBackward, Accelerated, ForwardBackwardForward };

struct SolverConfig {
    double c = 1.0;
    double rho = 0.5;
    double nu = 0.1;
    double theta = 0.5;
    double beta = 0.5;
    double gamma = 1e-3;
    double delta = 2.0;
    double sigma = 0.5;
    std::optional<double> c_bar;  // defaults to F(x0) + 1 at run start
    int max_outer = 200;
    int max_inner = 20000;
    int max_backtracks = 60;
    double r_tol = 1e-12;
    double subres_floor = 1e-14;
    DampingMode damping_mode = DampingMode::Power;
    std::optional<Modulus> modulus;
    InnerMethod inner_method = InnerMethod::Auto;
    bool relaxed_acceptance = false;
    double jacobian_noise = 0.0;  // eta in ||J_t - grad A(x_t)|| = eta * r_t^theta
    std::uint64_t noise_seed = 0;
};

/// Parameters accepted by make_config; unset fields take the defaults.
struct ConfigParams {
    std::optional<double> c, rho, nu, theta, beta, gamma, delta, sigma, c_bar, r_tol, subres_floor;
    std::optional<int> max_outer, max_inner, max_backtracks;
    std::optional<DampingMode> damping_mode;
    std::optional<Modulus> modulus;
    std::optional<InnerMethod> inner_method;
    std::optional<bool> relaxed_acceptance;
    std::optional<double> jacobian_noise;
    std::optional<std::uint64_t> noise_seed;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}
}  // namespace detail

inline void validate(const SolverConfig& cfg) {
    using detail::require;
    require(cfg.c > 0.0 && std::isfinite(cfg.c), "c must be positive");
    require(cfg.rho > 0.0 && cfg.rho <= 1.0, "rho must lie in (0, 1]");
    require(cfg.nu >= 0.0 && cfg.nu < 1.0, "nu must lie in [0, 1)");
    require(cfg.theta >= cfg.rho, "theta must be >= rho");
    require(cfg.beta > 0.0 && cfg.beta < 1.0, "beta must lie in (0, 1)");
    require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma must lie in (0, 1)");
    require(cfg.delta >= 0.0 && std::isfinite(cfg.delta), "delta must be >= 0");
    require(cfg.sigma > 0.0 && cfg.sigma < 1.0, "sigma must lie in (0, 1)");
    require(cfg.max_outer >= 1, "max_outer must be >= 1");
    require(cfg.max_inner >= 1, "max_inner must be >= 1");
    require(cfg.max_backtracks >= 0, "max_backtracks must be >= 0");
    require(cfg.r_tol > 0.0, "r_tol must be positive");
    require(cfg.subres_floor >= 0.0, "subres_floor must be >= 0");
    require(cfg.jacobian_noise >= 0.0, "jacobian_noise must be >= 0");
    if (cfg.damping_mode == DampingMode::Modulus && !cfg.modulus)
        throw ConfigError("modulus damping mode requires a modulus");
}

inline SolverConfig make_config(const ConfigParams& p = {}) {
    SolverConfig cfg;
    if (p.c) cfg.c = *p.c;
    if (p.rho) cfg.rho = *p.rho;
    cfg.theta = p.theta ? *p.theta : cfg.rho;
    if (p.nu) cfg.nu = *p.nu;
    if (p.beta) cfg.beta = *p.beta;
    if (p.gamma) cfg.gamma = *p.gamma;
    if (p.delta) cfg.delta = *p.delta;
    if (p.sigma) cfg.sigma = *p.sigma;
    cfg.c_bar = p.c_bar;
    if (p.r_tol) cfg.r_tol = *p.r_tol;
    if (p.subres_floor) cfg.subres_floor = *p.subres_floor;
    if (p.max_outer) cfg.max_outer = *p.max_outer;
    if (p.max_inner) cfg.max_inner = *p.max_inner;
    if (p.max_backtracks) cfg.max_backtracks = *p.max_backtracks;
    if (p.damping_mode) cfg.damping_mode = *p.damping_mode;
    cfg.modulus = p.modulus;
    if (p.inner_method) cfg.inner_method = *p.inner_method;
    if (p.relaxed_acceptance) cfg.relaxed_acceptance = *p.relaxed_acceptance;
    if (p.jacobian_noise) cfg.jacobian_noise = *p.jacobian_noise;
    if (p.noise_seed) cfg.noise_seed = *p.noise_seed;
    validate(cfg);
    return cfg;
}

enum class Algorithm { Local, Alg1, Alg2, Alg3 };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Local: return "local";
        case Algorithm::Alg1: return "alg1";
        case Algorithm::Alg2: return "alg2";
        case Algorithm::Alg3: return "alg3";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "local") return Algorithm::Local;
    if (s == "alg1") return Algorithm::Alg1;
    if (s == "alg2") return Algorithm::Alg2;
    if (s == "alg3") return Algorithm::Alg3;
    throw ConfigError("unknown algorithm '" + s + "'");
}

/// Bits of TraceRow::flags.
enum InvariantFlag : std::uint32_t {
    kMetricNotPsd = 1u << 0,
    kCertificateMissed = 1u << 1,
    kStepBoundViolated = 1u << 2,
    kModelIncrease = 1u << 3,
    kHybridStep = 1u << 4,    // alg1 step accepted by the residual test
    kNormBoundRaised = 1u << 5,
};

/// One outer iteration. The final row of a run records only the state at
/// the terminal iterate (t, r, F, dist); its step fields are empty.
struct TraceRow {
    int t = 0;
    double r = 0.0;
    std::optional<double> F;
    std::optional<double> dist;
    std::optional<double> alpha;
    std::optional<double> mu;
    std::optional<double> step_norm;
    std::optional<int> inner_iters;
    std::optional<double> subres;
    std::optional<bool> unit_step;

    // Kept in memory only; not part of the CSV schema.
    std::uint32_t flags = 0;
    std::optional<double> h_norm;
    std::optional<double> eta;

    bool is_step() const { return alpha.has_value(); }
};

struct IterateTrace {
    Algorithm algorithm = Algorithm::Local;
    std::vector<TraceRow> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    const TraceRow& back() const { return rows.back(); }
};

}  // namespace pnewton
