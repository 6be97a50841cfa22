#pragma once

#include "pnewton/solvers.hpp"

#include <memory>
#include <random>

namespace pnewton {

namespace detail {

inline LinearMap gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    LinearMap G(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = normal(rng);
    return G;
}

inline Point gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Point v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline Point uniform_vector(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Point v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = unif(rng);
    return v;
}

/// rows x cols with orthonormal columns (cols <= rows).
inline LinearMap orthonormal_columns(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    Eigen::HouseholderQR<LinearMap> qr(gaussian_matrix(rows, cols, rng));
    return qr.householderQ() * LinearMap::Identity(rows, cols);
}

inline Point soft_threshold(const Point& z, double thresh) {
    return (z.array().abs() - thresh).max(0.0) * z.array().sign();
}

inline Point clamp_box(const Point& z) { return z.cwiseMax(-1.0).cwiseMin(1.0); }

inline double spectral_norm(const LinearMap& A) {
    Eigen::BDCSVD<LinearMap> svd(A);
    return svd.singularValues()(0);
}

}  // namespace detail

/// Componentwise soft threshold: prox of tau*lambda*||.||_1.
inline Point soft_threshold(const Point& z, double thresh) { return detail::soft_threshold(z, thresh); }

/// f(x) = 1/2 x^T M x - b^T x with M = Q D Q^T PSD of the given rank and
/// b in range(M); Psi = 0. Solutions form the affine set {x : Mx = b}.
/// f carries the constant offset that makes F* = 0, so objective gaps near
/// the solution stay resolvable in double precision.
inline ProblemInstance make_quadratic_singular(int n, int rank, std::uint64_t seed) {
    if (n < 1 || rank < 1 || rank > n) throw ProblemError("quadratic_singular needs 1 <= rank <= n");
    std::mt19937_64 rng(seed);
    const LinearMap Q = detail::orthonormal_columns(n, rank, rng);
    const Point eig = detail::uniform_vector(rank, 0.5, 2.0, rng);
    auto M = std::make_shared<const LinearMap>(Q * eig.asDiagonal() * Q.transpose());
    const Point z = detail::gaussian_vector(n, rng);
    auto b = std::make_shared<const Point>(*M * z);
    // minimum-norm solution M^+ b and projector onto range(M)
    const Point x_mn = Q * (eig.cwiseInverse().asDiagonal() * (Q.transpose() * *b));
    auto proj = std::make_shared<const LinearMap>(Q * Q.transpose());

    ProblemInstance p;
    p.kind = ProblemKind::Regularized;
    p.name = "quadratic_singular";
    p.dim = n;
    RegularizedProblem reg;
    // 1/2 x^T M x - b^T x + 1/2 b^T M^+ b = 1/2 sum_i e_i (q_i^T (x - x_mn))^2, evaluated in
    // range coordinates so a large null-space component of x - x_mn does not swamp small values
    auto Qp = std::make_shared<const LinearMap>(Q);
    auto eigp = std::make_shared<const Point>(eig);
    reg.f_value = [Qp, eigp, x_mn](const Point& x) {
        const Point y = Qp->transpose() * (x - x_mn);
        return 0.5 * y.dot(eigp->cwiseProduct(y));
    };
    reg.f_grad = [Qp, eigp, x_mn](const Point& x) -> Point {
        return *Qp * eigp->cwiseProduct(Qp->transpose() * (x - x_mn));
    };
    reg.f_hess = [M](const Point&) -> LinearMap { return *M; };
    reg.psi_value = [](const Point&) { return 0.0; };
    reg.psi_prox = [](double, const Point& z) -> Point { return z; };
    reg.lipschitz_L = eig.maxCoeff();
    reg.psi_is_zero = true;
    p.regularized = std::move(reg);

    p.metadata.holder_p = 1.0;
    p.metadata.holder_zeta = 0.0;
    p.metadata.eb_q = 1.0;
    p.metadata.eb_kappa = 1.0 / eig.minCoeff();
    p.metadata.dist_oracle = [proj, x_mn](const Point& x) { return (*proj * (x - x_mn)).norm(); };
    p.metadata.f_star = 0.0;
    p.metadata.reference_solution = x_mn;
    p.default_x0 = detail::gaussian_vector(n, rng);
    return p;
}

/// Data of the degenerate lasso: D (m x n) of the given rank and b = D x_true + noise
/// with a sparse x_true. Independent of lambda, so lambda can be chosen afterwards.
struct LassoData {
    LinearMap D;
    Point b;
    double lambda_max = 0.0;  // ||D^T b||_inf: x = 0 solves for lambda >= lambda_max
};

inline LassoData make_lasso_data(int m, int n, int rank, std::uint64_t seed) {
    if (m < 1 || n < 1 || rank < 1 || rank > std::min(m, n))
        throw ProblemError("lasso_degenerate needs 1 <= rank <= min(m, n)");
    std::mt19937_64 rng(seed);
    const LinearMap U = detail::orthonormal_columns(m, rank, rng);
    const LinearMap V = detail::orthonormal_columns(n, rank, rng);
    const Point s = detail::uniform_vector(rank, 0.5, 1.5, rng);
    LassoData data;
    data.D = U * s.asDiagonal() * V.transpose();
    Point x_true = Point::Zero(n);
    const int support = std::max(1, std::min(n, rank) / 5);
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < support; ++k) x_true(pick(rng)) = detail::gaussian_vector(1, rng)(0) + 1.0;
    data.b = data.D * x_true + 0.01 * detail::gaussian_vector(m, rng);
    data.lambda_max = (data.D.transpose() * data.b).cwiseAbs().maxCoeff();
    return data;
}

/// Reference solve used by the lasso fixture; exposed so tests can inspect it.
struct LassoReference {
    Point x;
    double r = 0.0;
    double F = 0.0;  // unshifted 1/2 ||D x - b||^2 + lambda ||x||_1
    bool unique_support = false;
};

namespace detail {

/// Lasso objective pieces shifted by their values at `anchor`:
/// f(x) - f(anchor) = <D d, (D anchor - b) + D d / 2> and
/// Psi(x) - Psi(anchor) = lambda * sum(|x_i| - |anchor_i|), with d = x - anchor.
/// Near the anchor both are accurate to roundoff relative to the gap itself.
inline void set_lasso_objective(RegularizedProblem& reg, std::shared_ptr<const LinearMap> D,
                                std::shared_ptr<const Point> b, double lambda, const Point& anchor) {
    auto a = std::make_shared<const Point>(anchor);
    auto res_a = std::make_shared<const Point>(*D * anchor - *b);
    reg.f_value = [D, a, res_a](const Point& x) {
        const Point Dd = *D * (x - *a);
        return Dd.dot(*res_a + 0.5 * Dd);
    };
    reg.psi_value = [a, lambda](const Point& x) { return lambda * (x.array().abs() - a->array().abs()).sum(); };
}

}  // namespace detail

/// f(x) = 1/2 ||Dx - b||^2, Psi = lambda ||x||_1 with rank(D) < n.
/// A reference solution x_ref is computed once by a high-accuracy solve, and
/// objective values are reported relative to F(x_ref) (so F* = 0 up to the
/// reference accuracy). The shift is a constant: iterates, prox and residuals
/// are those of the unshifted problem.
inline ProblemInstance make_lasso_degenerate(int m, int n, int rank, double lambda, std::uint64_t seed,
                                             LassoReference* reference_out = nullptr) {
    if (!(lambda > 0.0)) throw ProblemError("lasso_degenerate needs lambda > 0");
    const LassoData data = make_lasso_data(m, n, rank, seed);
    auto D = std::make_shared<const LinearMap>(data.D);
    auto b = std::make_shared<const Point>(data.b);
    auto DtD = std::make_shared<const LinearMap>(data.D.transpose() * data.D);
    auto Dtb = std::make_shared<const Point>(data.D.transpose() * data.b);

    ProblemInstance p;
    p.kind = ProblemKind::Regularized;
    p.name = "lasso_degenerate";
    p.dim = n;
    RegularizedProblem reg;
    reg.f_grad = [DtD, Dtb](const Point& x) -> Point { return *DtD * x - *Dtb; };
    reg.f_hess = [DtD](const Point&) -> LinearMap { return *DtD; };
    reg.psi_prox = [lambda](double tau, const Point& z) -> Point { return detail::soft_threshold(z, tau * lambda); };
    reg.lipschitz_L = detail::spectral_norm(data.D);
    reg.lipschitz_L *= reg.lipschitz_L;
    detail::set_lasso_objective(reg, D, b, lambda, Point::Zero(n));
    p.regularized = std::move(reg);
    p.metadata.holder_p = 1.0;
    p.metadata.holder_zeta = 0.0;
    p.metadata.eb_q = 1.0;
    p.default_x0 = Point::Zero(n);

    // High-accuracy pre-solve: a first pass, then a polish with the objective
    // re-anchored at the first pass result.
    SolverConfig cfg;
    cfg.rho = 1.0;
    cfg.theta = 1.0;
    cfg.nu = 1e-3;
    cfg.r_tol = 1e-13;
    cfg.subres_floor = 1e-15;
    cfg.max_outer = 500;
    cfg.max_inner = 200000;
    RunResult pre = run_alg2(p, p.default_x0, cfg);
    detail::set_lasso_objective(*p.regularized, D, b, lambda, pre.final_x);
    if (pre.final_r > cfg.r_tol) {
        RunResult polish = run_alg2(p, pre.final_x, cfg);
        if (polish.final_r < pre.final_r) pre = std::move(polish);
    }

    LassoReference ref;
    ref.x = pre.final_x;
    ref.r = pre.final_r;
    detail::set_lasso_objective(*p.regularized, D, b, lambda, ref.x);
    ref.F = 0.5 * (data.D * ref.x - data.b).squaredNorm() + lambda * ref.x.lpNorm<1>();
    // Equicorrelation set; linearly independent columns certify a unique solution.
    const Point corr = data.D.transpose() * (data.b - data.D * ref.x);
    std::vector<int> eq;
    for (int i = 0; i < n; ++i)
        if (std::abs(corr(i)) >= lambda * (1.0 - 1e-8)) eq.push_back(i);
    if (!eq.empty()) {
        LinearMap DE(m, static_cast<Eigen::Index>(eq.size()));
        for (std::size_t k = 0; k < eq.size(); ++k) DE.col(static_cast<Eigen::Index>(k)) = data.D.col(eq[k]);
        Eigen::ColPivHouseholderQR<LinearMap> qr(DE);
        qr.setThreshold(1e-10);
        ref.unique_support = qr.rank() == static_cast<Eigen::Index>(eq.size());
    } else {
        ref.unique_support = true;
    }

    p.metadata.f_star = 0.0;
    p.metadata.reference_solution = ref.x;
    if (ref.unique_support) {
        const Point xs = ref.x;
        p.metadata.dist_oracle = [xs](const Point& x) { return (x - xs).norm(); };
    }
    if (reference_out) *reference_out = ref;
    return p;
}

/// f(x) = 1/2 ||x||^2 + sum |x_i|^{1+gamma}, optionally Psi = lambda ||x||_1.
/// The Hessian diag(1 + gamma(1+gamma)|x_i|^{gamma-1}) is (gamma-1)-Hoelder near 0.
inline ProblemInstance make_holder(int n, double gamma, std::uint64_t seed, double lambda = 0.0) {
    if (!(gamma > 1.0 && gamma < 2.0)) throw ProblemError("holder problem needs gamma in (1, 2)");
    if (n < 1) throw ProblemError("holder problem needs n >= 1");
    if (lambda < 0.0) throw ProblemError("holder problem needs lambda >= 0");
    std::mt19937_64 rng(seed);

    ProblemInstance p;
    p.kind = ProblemKind::Regularized;
    p.name = "holder";
    p.dim = n;
    RegularizedProblem reg;
    reg.f_value = [gamma](const Point& x) {
        return 0.5 * x.squaredNorm() + x.array().abs().pow(1.0 + gamma).sum();
    };
    reg.f_grad = [gamma](const Point& x) -> Point {
        return x.array() + (1.0 + gamma) * x.array().sign() * x.array().abs().pow(gamma);
    };
    reg.f_hess = [gamma](const Point& x) -> LinearMap {
        Point d = 1.0 + gamma * (1.0 + gamma) * x.array().abs().pow(gamma - 1.0);
        return d.asDiagonal();
    };
    if (lambda > 0.0) {
        reg.psi_value = [lambda](const Point& x) { return lambda * x.lpNorm<1>(); };
        reg.psi_prox = [lambda](double tau, const Point& z) -> Point {
            return detail::soft_threshold(z, tau * lambda);
        };
    } else {
        reg.psi_value = [](const Point&) { return 0.0; };
        reg.psi_prox = [](double, const Point& z) -> Point { return z; };
        reg.psi_is_zero = true;
    }
    p.default_x0 = detail::uniform_vector(n, -1.0, 1.0, rng);
    // grad f is Lipschitz on the sublevel set of x0, where |x_i| <= sqrt(2 F(x0)).
    const double radius = std::sqrt(2.0 * reg.objective(p.default_x0));
    reg.lipschitz_L = 1.0 + gamma * (1.0 + gamma) * std::pow(radius, gamma - 1.0);
    p.regularized = std::move(reg);

    p.metadata.holder_p = gamma - 1.0;
    p.metadata.holder_zeta = gamma * (1.0 + gamma);
    p.metadata.eb_q = 1.0;
    p.metadata.eb_kappa = 1.0;
    p.metadata.dist_oracle = [](const Point& x) { return x.norm(); };
    p.metadata.f_star = 0.0;
    p.metadata.reference_solution = Point::Zero(n);
    return p;
}

namespace detail {

/// Solution with a third of the coordinates at +1, a third at -1 and the rest
/// interior, and the value A(x*) must take there (strictly complementary).
inline std::pair<Point, Point> box_solution(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Point xs(n), target(n);
    for (int i = 0; i < n; ++i) {
        const double u = unif(rng);
        const double mag = 0.5 + unif(rng);
        if (i % 3 == 0) {
            xs(i) = 1.0;
            target(i) = -mag;
        } else if (i % 3 == 1) {
            xs(i) = -1.0;
            target(i) = mag;
        } else {
            xs(i) = u - 0.5;
            target(i) = 0.0;
        }
    }
    return {xs, target};
}

inline MonotoneOperator box_normal_cone() {
    return {[](double, const Point& z) -> Point { return clamp_box(z); }};
}

}  // namespace detail

/// A(x) = Mx + c with M = S + K (S positive definite, K skew when
/// nonsymmetric); B = normal cone of [-1, 1]^n.
inline ProblemInstance make_box_ge(int n, std::uint64_t seed, bool nonsymmetric) {
    if (n < 2) throw ProblemError("box_ge needs n >= 2");
    std::mt19937_64 rng(seed);
    const LinearMap G = detail::gaussian_matrix(n, n, rng);
    LinearMap M = G * G.transpose() / n + 0.2 * LinearMap::Identity(n, n);
    if (nonsymmetric) {
        const LinearMap W = detail::gaussian_matrix(n, n, rng);
        LinearMap K = 0.5 * (W - W.transpose());
        K /= detail::spectral_norm(K);
        M += K;
    }
    auto [xs, target] = detail::box_solution(n, rng);
    auto Mp = std::make_shared<const LinearMap>(M);
    auto c = std::make_shared<const Point>(target - M * xs);

    ProblemInstance p;
    p.kind = ProblemKind::GeneralizedEquation;
    p.name = "box_ge";
    p.dim = n;
    SmoothMap A;
    A.eval = [Mp, c](const Point& x) -> Point { return *Mp * x + *c; };
    A.jacobian = [Mp](const Point&) -> LinearMap { return *Mp; };
    A.lipschitz_bound = detail::spectral_norm(M);
    p.ge_map = std::move(A);
    p.ge_operator = detail::box_normal_cone();

    Eigen::SelfAdjointEigenSolver<LinearMap> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    p.metadata.holder_p = 1.0;
    p.metadata.holder_zeta = 0.0;
    p.metadata.eb_q = 1.0;
    // strong monotonicity s: dist <= (1 + ||M||) / s * r
    p.metadata.eb_kappa = (1.0 + A.lipschitz_bound) / es.eigenvalues().minCoeff();
    p.metadata.dist_oracle = [xs](const Point& x) { return (x - xs).norm(); };
    p.metadata.reference_solution = xs;
    p.default_x0 = detail::uniform_vector(n, -2.0, 2.0, rng);
    return p;
}

/// A(x) = Mx + c - eps (x - x*)^3 (componentwise) with M PSD and singular;
/// B = normal cone of [-1, 1]^n. grad A(x*) = M, but A is not monotone once
/// |x_i - x*_i|^2 exceeds M_ii / eps.
inline ProblemInstance make_nonmonotone_ge(int n, double eps, std::uint64_t seed) {
    if (n < 2) throw ProblemError("nonmonotone_ge needs n >= 2");
    if (!(eps >= 0.0)) throw ProblemError("nonmonotone_ge needs eps >= 0");
    std::mt19937_64 rng(seed);
    const int k = std::max(1, n / 2);
    const LinearMap G = detail::gaussian_matrix(n, k, rng);
    const LinearMap M = G * G.transpose() / k;
    auto [xs, target] = detail::box_solution(n, rng);
    auto Mp = std::make_shared<const LinearMap>(M);
    auto c = std::make_shared<const Point>(target - M * xs);
    auto xsp = std::make_shared<const Point>(xs);

    ProblemInstance p;
    p.kind = ProblemKind::GeneralizedEquation;
    p.name = "nonmonotone_ge";
    p.dim = n;
    SmoothMap A;
    A.eval = [Mp, c, xsp, eps](const Point& x) -> Point {
        return *Mp * x + *c - eps * (x - *xsp).array().cube().matrix();
    };
    A.jacobian = [Mp, xsp, eps](const Point& x) -> LinearMap {
        LinearMap J = *Mp;
        J.diagonal().array() -= 3.0 * eps * (x - *xsp).array().square();
        return J;
    };
    // on the box |x_i - x*_i| <= 2
    A.lipschitz_bound = detail::spectral_norm(M) + 12.0 * eps;
    p.ge_map = std::move(A);
    p.ge_operator = detail::box_normal_cone();

    p.metadata.holder_p = 1.0;
    p.metadata.holder_zeta = 6.0 * eps;
    p.metadata.reference_solution = xs;
    p.default_x0 = xs + 0.05 * detail::gaussian_vector(n, rng);
    return p;
}

}  // namespace pnewton
