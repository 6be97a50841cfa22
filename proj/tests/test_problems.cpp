#include "support/oracles.hpp"
#include "support/small_problems.hpp"

#include <gtest/gtest.h>

#include <iostream>

using namespace pnewton;

namespace {

struct Fixtures {
    ProblemInstance quad = make_quadratic_singular(30, 10, 3);
    ProblemInstance lasso = make_lasso_degenerate(40, 60, 12, 0.2, 5);
    ProblemInstance holder = make_holder(20, 1.5, 3);
    ProblemInstance holder_l1 = make_holder(20, 1.3, 3, 0.1);
    ProblemInstance box = make_box_ge(15, 4, true);
    ProblemInstance nonmono = make_nonmonotone_ge(14, 2.0, 4);

    std::vector<const ProblemInstance*> all() const { return {&quad, &lasso, &holder, &holder_l1, &box, &nonmono}; }
};

const Fixtures& fixtures() {
    static const Fixtures f;
    return f;
}

}  // namespace

TEST(Problems, FiniteDifferenceGradients) {
    oracle::Gen gen(1);
    for (const ProblemInstance* prob : fixtures().all()) {
        for (int i = 0; i < 10; ++i) {
            Point x = gen.vec(prob->dim);
            if (prob->is_regularized()) {
                const auto& reg = prob->reg();
                const Point fd = oracle::fd_gradient(reg.f_value, x);
                EXPECT_LE(oracle::rel_err(reg.f_grad(x), fd), 1e-5) << prob->name;
            } else {
                const LinearMap fd = oracle::fd_jacobian(prob->ge_map->eval, x);
                EXPECT_LE(oracle::rel_err(prob->jacobian(x), fd), 1e-5) << prob->name;
            }
        }
    }
}

TEST(Problems, FiniteDifferenceHessians) {
    oracle::Gen gen(2);
    for (const ProblemInstance* prob : {&fixtures().quad, &fixtures().lasso, &fixtures().holder}) {
        for (int i = 0; i < 10; ++i) {
            Point x = gen.vec(prob->dim);
            // keep away from the Hoelder kink at 0
            for (auto& e : x)
                if (std::abs(e) < 0.1) e = std::copysign(0.1 + std::abs(e), e);
            const LinearMap fd = oracle::fd_jacobian(prob->reg().f_grad, x);
            EXPECT_LE(oracle::rel_err(prob->jacobian(x), fd), 1e-5) << prob->name;
        }
    }
}

TEST(Problems, ResolventsAreFirmlyNonexpansive) {
    oracle::Gen gen(3);
    for (const ProblemInstance* prob : fixtures().all()) {
        for (int i = 0; i < 50; ++i) {
            const double tau = gen.uniform(0.01, 10.0);
            const Point u = gen.vec(prob->dim, 2.0), v = gen.vec(prob->dim, 2.0);
            const Point d = prob->resolvent(tau, u) - prob->resolvent(tau, v);
            EXPECT_LE(d.squaredNorm(), d.dot(u - v) + 1e-12) << prob->name;
        }
    }
}

TEST(Problems, ErrorBoundWitness) {
    oracle::Gen gen(4);
    for (const ProblemInstance* prob : fixtures().all()) {
        if (!prob->metadata.dist_oracle || !prob->metadata.reference_solution) continue;
        const double q = prob->metadata.eb_q.value_or(1.0);
        double kappa_emp = 0.0;
        for (int i = 0; i < 100; ++i) {
            const Point x = *prob->metadata.reference_solution + gen.vec(prob->dim, gen.uniform(1e-6, 1e-2));
            const double r = residual_fb(*prob, x).r;
            if (r == 0.0) continue;
            kappa_emp = std::max(kappa_emp, prob->metadata.dist_oracle(x) / std::pow(r, q));
        }
        std::cout << prob->name << ": empirical kappa " << kappa_emp << '\n';
        EXPECT_TRUE(std::isfinite(kappa_emp));
        if (prob->metadata.eb_kappa) EXPECT_LE(kappa_emp, *prob->metadata.eb_kappa * (1.0 + 1e-6)) << prob->name;
    }
}

TEST(QuadraticSingular, Basics) {
    const auto& quad = fixtures().quad;
    const Point xs = *quad.metadata.reference_solution;
    EXPECT_LE(quad.metadata.dist_oracle(xs), 1e-12);
    EXPECT_LE(residual_fb(quad, xs).r, 1e-12);
    const LinearMap M = quad.jacobian(xs);
    const Point b = -quad.reg().f_grad(Point::Zero(30));
    Eigen::SelfAdjointEigenSolver<LinearMap> es(M, Eigen::EigenvaluesOnly);
    int rank = 0;
    for (double e : es.eigenvalues())
        if (e > 1e-10) ++rank;
    EXPECT_EQ(rank, 10);
    oracle::Gen gen(5);
    for (int i = 0; i < 10; ++i) {
        const Point x = gen.vec(30);
        EXPECT_NEAR(residual_fb(quad, x).r, (M * x - b).norm(), 1e-10);
    }
    EXPECT_THROW(make_quadratic_singular(5, 6, 1), ProblemError);
    EXPECT_NO_THROW(make_quadratic_singular(5, 5, 1));
}

TEST(Lasso, SoftThreshold) {
    EXPECT_EQ(soft_threshold(Point::Constant(1, 2.0), 1.0)(0), 1.0);
    EXPECT_EQ(soft_threshold(Point::Constant(1, -0.5), 1.0)(0), 0.0);
    oracle::Gen gen(6);
    for (int i = 0; i < 20; ++i) {
        const Point z = gen.vec(10);
        const double t = gen.uniform(0.0, 1.0);
        EXPECT_EQ(soft_threshold(z, t), oracle::soft_threshold(z, t));
    }
}

TEST(Lasso, ReferenceSolveIsAccurate) {
    LassoReference ref;
    const auto lasso = make_lasso_degenerate(100, 200, 50, 0.11355, 42, &ref);
    EXPECT_LE(ref.r, 1e-12);
    EXPECT_TRUE(ref.unique_support);
    EXPECT_LE(residual_fb(lasso, ref.x).r, 1e-12);
    int nnz = 0;
    for (double v : ref.x)
        if (v != 0.0) ++nnz;
    EXPECT_GT(nnz, 0);
    EXPECT_LT(nnz, 50);
    // shifted objective: F(x_ref) = 0 while differences match the plain formula
    EXPECT_EQ(lasso.reg().objective(ref.x), 0.0);
}

TEST(Lasso, LargeLambdaMakesZeroOptimal) {
    const LassoData data = make_lasso_data(30, 40, 8, 11);
    const auto lasso = make_lasso_degenerate(30, 40, 8, data.lambda_max * 1.01, 11);
    EXPECT_EQ(residual_fb(lasso, Point::Zero(40)).r, 0.0);
    const auto at_max = make_lasso_degenerate(30, 40, 8, data.lambda_max, 11);
    EXPECT_LE(residual_fb(at_max, Point::Zero(40)).r, 1e-14);
}

TEST(Lasso, ResidualBelowMinNormSubgradient) {
    const LassoData data = make_lasso_data(40, 60, 12, 5);
    const auto& lasso = fixtures().lasso;
    oracle::Gen gen(7);
    for (int i = 0; i < 100; ++i) {
        Point x = gen.vec(60);
        for (auto& e : x)
            if (gen.integer(0, 2) == 0) e = 0.0;
        const Point grad = data.D.transpose() * (data.D * x - data.b);
        const Point v = oracle::lasso_min_norm_subgradient(grad, x, 0.2);
        EXPECT_LE(residual_fb(lasso, x).r, v.norm() + 1e-12);
    }
}

TEST(Lasso, ObjectiveDifferencesMatchPlainFormula) {
    const LassoData data = make_lasso_data(40, 60, 12, 5);
    const auto& lasso = fixtures().lasso;
    auto plain = [&](const Point& x) { return 0.5 * (data.D * x - data.b).squaredNorm() + 0.2 * x.lpNorm<1>(); };
    oracle::Gen gen(8);
    const Point x0 = gen.vec(60);
    for (int i = 0; i < 10; ++i) {
        const Point x = gen.vec(60);
        EXPECT_NEAR(lasso.reg().objective(x) - lasso.reg().objective(x0), plain(x) - plain(x0),
                    1e-10 * (1.0 + std::abs(plain(x))));
    }
}

TEST(Holder, Metadata) {
    const auto& h = fixtures().holder;
    EXPECT_EQ(*h.metadata.holder_p, 0.5);
    EXPECT_EQ(*h.metadata.eb_q, 1.0);
    EXPECT_EQ(h.reg().f_grad(Point::Zero(20)).norm(), 0.0);
    EXPECT_EQ(residual_fb(h, Point::Zero(20)).r, 0.0);
    // Hessian 1 + 3.75 |x|^0.5 in one coordinate
    Point x = Point::Zero(20);
    x(0) = 0.25;
    EXPECT_NEAR(h.jacobian(x)(0, 0), 1.0 + 3.75 * 0.5, 1e-14);
    EXPECT_THROW(make_holder(5, 2.5, 1), ProblemError);
}

TEST(Holder, GradientLipschitzOnSublevelSet) {
    const auto& h = fixtures().holder;
    const double F0 = h.reg().objective(h.default_x0);
    oracle::Gen gen(9);
    for (int i = 0; i < 200; ++i) {
        const Point u = gen.vec(20, 0.3), v = gen.vec(20, 0.3);
        if (h.reg().objective(u) > F0 || h.reg().objective(v) > F0) continue;
        EXPECT_LE((h.reg().f_grad(u) - h.reg().f_grad(v)).norm(), h.reg().lipschitz_L * (u - v).norm() + 1e-12);
    }
}

TEST(BoxGe, ResolventIsProjection) {
    const auto& box = fixtures().box;
    oracle::Gen gen(10);
    for (int i = 0; i < 10; ++i) {
        const Point z = gen.vec(15, 2.0);
        const Point proj = z.cwiseMax(-1.0).cwiseMin(1.0);
        EXPECT_EQ(box.resolvent(0.3, z), proj);
        EXPECT_EQ(box.resolvent(7.0, z), proj);
    }
}

TEST(BoxGe, SolutionAndMonotonicity) {
    const auto& box = fixtures().box;
    EXPECT_LE(residual_fb(box, *box.metadata.reference_solution).r, 1e-14);
    EXPECT_EQ(box.metadata.dist_oracle(*box.metadata.reference_solution), 0.0);
    oracle::Gen gen(11);
    for (int i = 0; i < 50; ++i) {
        const Point u = gen.vec(15), v = gen.vec(15);
        EXPECT_GT((box.forward(u) - box.forward(v)).dot(u - v), 0.0);
    }
}

TEST(NonmonotoneGe, ZeroEpsIsBoxSemantics) {
    const auto p = make_nonmonotone_ge(10, 0.0, 2);
    const Point xs = *p.metadata.reference_solution;
    EXPECT_LE(residual_fb(p, xs).r, 1e-14);
    oracle::Gen gen(12);
    for (int i = 0; i < 50; ++i) {
        const Point u = gen.vec(10), v = gen.vec(10);
        EXPECT_GE((p.forward(u) - p.forward(v)).dot(u - v), -1e-12);
        const Point z = gen.vec(10, 2.0);
        EXPECT_EQ(p.resolvent(0.5, z), z.cwiseMax(-1.0).cwiseMin(1.0));
    }
}

TEST(NonmonotoneGe, JacobianAtSolutionIsPsdButOperatorIsNot) {
    const auto& p = fixtures().nonmono;
    const Point xs = *p.metadata.reference_solution;
    EXPECT_LE(residual_fb(p, xs).r, 1e-14);
    const LinearMap J = p.jacobian(xs);
    Eigen::SelfAdjointEigenSolver<LinearMap> es(0.5 * (J + J.transpose()), Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);

    oracle::Gen gen(13);
    bool found = false;
    for (int i = 0; i < 1000 && !found; ++i) {
        const Point u = xs + gen.vec(14, 1.0), v = xs + gen.vec(14, 1.0);
        const double inner = (p.forward(u) - p.forward(v)).dot(u - v);
        if (inner < 0.0) {
            found = true;
            std::cout << "nonmonotone witness at probe " << i << ": <A(u)-A(v), u-v> = " << inner << '\n';
        }
    }
    EXPECT_TRUE(found);
}

TEST(Problems, InvalidParameters) {
    EXPECT_THROW(make_lasso_data(10, 10, 11, 1), ProblemError);
    EXPECT_THROW(make_lasso_degenerate(10, 10, 5, 0.0, 1), ProblemError);
    EXPECT_THROW(make_box_ge(1, 1, true), ProblemError);
    EXPECT_THROW(make_nonmonotone_ge(5, -1.0, 1), ProblemError);
}
