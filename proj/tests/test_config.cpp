#include <gtest/gtest.h>

#include "topopt/config.hpp"

using namespace topopt;

namespace {

const char* kFull = R"(
; comment
[problem]
f = 4
yd = 1 - x1^2 - x2^2
g0 = sqrt(x1^2 + x2^2) - 1.5
u0 = 0.5*x1
eps = 0.05
med_domain = E

[mesh]
type = rect
bounds = -2 2 -1 1
cells_x = 20
cells_y = 10
observation_radius = 0.3
observation_sides = 12

[optimizer]
direction = full42
linearization = consistent
tol = 1e-5
max_iters = 7
threads = 2

[orbit]
dt = 0.005
fixed_m = 30

[output]
dir = results
)";

std::string without(const std::string& text, const std::string& line) {
    std::string s = text;
    s.erase(s.find(line), line.size() + 1);
    return s;
}

}  // namespace

TEST(Config, ParsesEverySection) {
    const RunConfig c = parse_config(kFull);
    EXPECT_EQ(c.f, "4");
    EXPECT_EQ(c.u0, "0.5*x1");
    EXPECT_DOUBLE_EQ(c.eps, 0.05);
    EXPECT_EQ(c.med_domain, MedDomain::observation);
    EXPECT_EQ(c.mesh.kind, MeshSpec::Kind::rect);
    EXPECT_EQ(c.mesh.cells_x, 20);
    EXPECT_EQ(c.mesh.cells_y, 10);
    EXPECT_DOUBLE_EQ(c.mesh.bounds.ymin, -1);
    EXPECT_EQ(c.optimizer.direction, DirectionKind::full42);
    EXPECT_EQ(c.optimizer.linearization, Linearization::consistent);
    EXPECT_EQ(c.optimizer.max_iters, 7);
    EXPECT_DOUBLE_EQ(c.optimizer.trace.dt, 0.005);
    EXPECT_EQ(c.optimizer.trace.fixed_m, 30);
    EXPECT_EQ(c.out, "results");

    const Mesh mesh = build_mesh(c.mesh);
    EXPECT_EQ(mesh.num_triangles(), 2 * 20 * 10);
    const ProblemData d = c.problem();
    EXPECT_DOUBLE_EQ(d.yd(0.5, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(d.j(ExprVars{0, 0, 2.0, 0.5}), 2.25);  // default integrand
}

TEST(Config, DefaultsWhenOptionalFieldsAreAbsent) {
    const RunConfig c = parse_config("[problem]\nf = 1\nyd = 0\ng0 = x1\neps = 0.1\n");
    EXPECT_EQ(c.optimizer.direction, DirectionKind::adjoint41);
    EXPECT_DOUBLE_EQ(c.optimizer.tol, 1e-6);
    EXPECT_EQ(c.optimizer.trials, 31);
    EXPECT_DOUBLE_EQ(c.optimizer.rho, 0.5);
    EXPECT_DOUBLE_EQ(c.optimizer.projection_value, -0.1);
    EXPECT_EQ(c.u0, "0");
    EXPECT_EQ(c.med_domain, MedDomain::hold_all);
}

TEST(Config, MissingEpsNamesTheField) {
    try {
        parse_config(without(kFull, "eps = 0.05"), "run.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("eps"), std::string::npos) << msg;
        EXPECT_NE(msg.find("run.cfg"), std::string::npos) << msg;
    }
}

TEST(Config, RejectsBadInput) {
    std::string typo = kFull;
    typo.replace(typo.find("tol = 1e-5"), 10, "tolerance = 1e-5");
    EXPECT_THROW(parse_config(typo), ConfigError);

    std::string bad_expr = kFull;
    bad_expr.replace(bad_expr.find("u0 = 0.5*x1"), 11, "u0 = min(x1,)");
    try {
        parse_config(bad_expr);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("u0"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("character 8"), std::string::npos) << e.what();
    }

    std::string bad_dir = kFull;
    bad_dir.replace(bad_dir.find("full42"), 6, "newton");
    EXPECT_THROW(parse_config(bad_dir), ConfigError);

    std::string bad_num = kFull;
    bad_num.replace(bad_num.find("dt = 0.005"), 10, "dt = fast");
    EXPECT_THROW(parse_config(bad_num), ConfigError);

    EXPECT_THROW(parse_config(std::string(kFull) + "\n[solver]\nx = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[problem]\nf = 1\nyd = 0\ng0 = x1\neps = -1\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/file.cfg"), ConfigError);
}
