#include <cmath>
#include <cstdlib>
#include <limits>

#include <gtest/gtest.h>

#include "topopt/optimize.hpp"

using namespace topopt;

namespace {

ProblemData paraboloid_target() {
    ProblemData d;
    d.f = Expr::parse("4");
    d.yd = Expr::parse("1 - x1^2 - x2^2");
    d.j = Expr::parse("(y-yd)^2", VarSet::state);
    d.j2 = Expr::parse("2*(y-yd)", VarSet::state);
    d.eps = 0.1;
    return d;
}

struct Ex2Problem {
    Mesh mesh = generate_rect_mesh({-3, 3, -3, 3}, 30, 30, regular_polygon({0, 0}, 0.5, 16));
    FemSystem sys{mesh, paraboloid_target()};
    Vector G = interpolate_nodes(mesh, [](const Vec2& x) {
        return std::max(x.norm() - 2.5, 0.5 - (x - Vec2(-1, -1)).norm());
    });
    Vector U = Vector::Zero(mesh.num_vertices());
};

}  // namespace

TEST(ProjectE, OnlyPositiveObservationValuesChange) {
    const Mesh mesh = generate_rect_mesh({-1, 1, -1, 1}, 8, 8, regular_polygon({0, 0}, 0.4, 8));
    Vector G = Vector::Constant(mesh.num_vertices(), -0.5);
    EXPECT_EQ(project_E(mesh, G), G);

    const int e = mesh.observation_nodes().front();
    int outside = -1;
    for (int i = 0; i < mesh.num_vertices(); ++i)
        if (mesh.observation_index(i) < 0) outside = i;
    G[e] = 1.0;
    G[outside] = 2.0;
    const Vector P = project_E(mesh, G);
    EXPECT_DOUBLE_EQ(P[e], -0.1);
    EXPECT_DOUBLE_EQ(P[outside], 2.0);
    EXPECT_EQ(project_E(mesh, P), P);
    EXPECT_DOUBLE_EQ(project_E(mesh, G, -0.3)[e], -0.3);
}

TEST(LineSearch, SelectionOverTheTrialSet) {
    // (λ - 0.3)² over λ = 0.5^i, i = 0..30: the nearest trial is 0.25.
    std::vector<double> J;
    for (int i = 0; i <= 30; ++i) J.push_back(std::pow(std::pow(0.5, i) - 0.3, 2));
    EXPECT_EQ(select_trial(J), 2);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(select_trial({nan, 3.0, 1.0, 1.0}), 2);  // ties go to the larger step
    EXPECT_EQ(select_trial({nan, nan}), -1);
}

TEST(LineSearch, ZeroDirectionSignalsNoImprovement) {
    Ex2Problem s;
    OptimizerConfig cfg;
    cfg.trials = 4;
    const Evaluation ev = evaluate(s.sys, s.G, s.U, cfg.trace);
    DescentDirection zero;
    zero.R = zero.V = Vector::Zero(s.mesh.num_vertices());
    const LineSearchResult ls = line_search(s.sys, ev, zero, cfg);
    EXPECT_DOUBLE_EQ(ls.gamma, 1.0);
    ASSERT_EQ(ls.best, 0);
    EXPECT_DOUBLE_EQ(ls.trials[0].J, ev.cost.total);
    EXPECT_FALSE(ls.improved(ev.cost.total));
}

TEST(LineSearch, ScalesTheLevelSetStepBySupNorm) {
    Ex2Problem s;
    OptimizerConfig cfg;
    cfg.trials = 3;
    const Evaluation ev = evaluate(s.sys, s.G, s.U, cfg.trace);
    const Vector P = compute_adjoint(s.sys, ev);
    DescentDirection d = direction_rstar(s.sys, ev, P);
    d.R = Vector::Constant(s.mesh.num_vertices(), 4.0);
    const LineSearchResult ls = line_search(s.sys, ev, d, cfg);
    EXPECT_DOUBLE_EQ(ls.gamma, 0.25);
}

TEST(Optimize, DescentIsMonotoneAndKeepsEInside) {
    Ex2Problem s;
    OptimizerConfig cfg;
    cfg.max_iters = 4;
    cfg.threads = 1;
    int calls = 0;
    const RunResult r = run(s.sys, s.G, s.U, cfg, [&](const IterationRecord& rec, const Evaluation& ev) {
        EXPECT_EQ(rec.iter, calls++);
        for (int i : s.mesh.observation_nodes()) EXPECT_LT(ev.G[i], 0.0);
    });
    ASSERT_EQ(r.history.size(), 5u);
    for (std::size_t k = 1; k < r.history.size(); ++k) {
        EXPECT_LE(r.history[k].cost.total, r.history[k - 1].cost.total);
        EXPECT_GT(r.history[k].lambda, 0.0);
    }
    EXPECT_LT(r.history.back().cost.total, 0.2 * r.history.front().cost.total);
    EXPECT_EQ(r.reason, StopReason::max_iters);
}

TEST(Optimize, HistoryIsIndependentOfThreadCount) {
    Ex2Problem s;
    OptimizerConfig cfg;
    cfg.max_iters = 2;
    cfg.threads = 1;
    const RunResult a = run(s.sys, s.G, s.U, cfg);
    const RunResult b = run(s.sys, s.G, s.U, cfg);
    cfg.threads = 3;
    const RunResult c = run(s.sys, s.G, s.U, cfg);
    ASSERT_EQ(a.history.size(), c.history.size());
    for (std::size_t k = 0; k < a.history.size(); ++k) {
        EXPECT_EQ(a.history[k].cost.total, b.history[k].cost.total);
        EXPECT_EQ(a.history[k].cost.total, c.history[k].cost.total);
        EXPECT_EQ(a.history[k].lambda, c.history[k].lambda);
    }
    EXPECT_EQ(a.final_eval.G, c.final_eval.G);
}

TEST(Optimize, LooseToleranceStopsAfterFirstStep) {
    Ex2Problem s;
    OptimizerConfig cfg;
    cfg.tol = 1e12;
    const RunResult r = run(s.sys, s.G, s.U, cfg);
    EXPECT_EQ(r.reason, StopReason::tolerance);
    EXPECT_EQ(r.history.size(), 2u);
}

TEST(Optimize, RejectsInadmissibleStart) {
    Ex2Problem s;
    const Vector positive = Vector::Ones(s.mesh.num_vertices());
    EXPECT_THROW(run(s.sys, positive, s.U, OptimizerConfig{}), AdmissibilityError);
    OptimizerConfig bad;
    bad.rho = 1.5;
    EXPECT_THROW(run(s.sys, s.G, s.U, bad), std::invalid_argument);
}

TEST(Optimize, ThreadCapFromEnvironment) {
    ::setenv("TOPOPT_THREADS", "2", 1);
    EXPECT_EQ(worker_threads(8), 2);
    EXPECT_EQ(worker_threads(1), 1);
    ::setenv("TOPOPT_THREADS", "junk", 1);
    EXPECT_EQ(worker_threads(5), 5);
    ::unsetenv("TOPOPT_THREADS");
    EXPECT_GE(worker_threads(), 1);
}
