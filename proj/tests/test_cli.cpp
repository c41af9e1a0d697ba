// Runs the topopt executable end to end on the configurations in tests/data.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "topopt/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "topopt_cli_test.log";
    const std::string cmd = std::string(TOPOPT_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string data(const std::string& name) { return (fs::path(TEST_DATA_DIR) / name).string(); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "topopt_cli_tests" / name;
    fs::remove_all(p);
    return p;
}

double number_after(const std::string& text, const std::string& label) {
    const std::regex re(label + R"(\s*=?\s*([-+0-9.eE]+))");
    std::smatch m;
    if (!std::regex_search(text, m, re)) ADD_FAILURE() << "no '" << label << "' in:\n" << text;
    return m.empty() ? std::nan("") : std::stod(m[1]);
}

}  // namespace

TEST(Cli, MissingRequiredFieldIsAConfigError) {
    const Result r = run("solve --config " + data("missing_eps.cfg") + " --out " + scratch("x").string());
    EXPECT_EQ(r.code, 1) << r.output;
    EXPECT_NE(r.output.find("eps"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitWithOne) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("solve").code, 1);
    EXPECT_EQ(run("solve --config " + data("circle.cfg") + " --direction newton").code, 1);
    EXPECT_EQ(run("trace --config /nonexistent.cfg").code, 1);
}

TEST(Cli, InadmissibleStartIsANumericalFailure) {
    const Result r = run("solve --config " + data("positive_g.cfg") + " --out " + scratch("pos").string());
    EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Cli, TraceOfTheUnitCircle) {
    const fs::path out = scratch("circle");
    const Result r = run("trace --config " + data("circle.cfg") + " --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("1 component(s)"), std::string::npos) << r.output;
    EXPECT_NEAR(number_after(r.output, "period"), M_PI, 0.02 * M_PI);
    const auto orbits = topopt::read_orbits_csv(out / "orbits.csv");
    ASSERT_EQ(orbits.size(), 1u);
    EXPECT_EQ(orbits[0].Z.front(), orbits[0].Z.back());
}

TEST(Cli, FixedMRetrace) {
    const Result r = run("trace --config " + data("circle.cfg") + " --fixed-m 30 --out " + scratch("m30").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NEAR(number_after(r.output, "m"), 30, 0);
}

TEST(Cli, ZeroSourceGivesZeroState) {
    const fs::path out = scratch("zero");
    const Result r = run("state --config " + data("zero_source.cfg") + " --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(number_after(r.output, "max \\|y\\|"), 0.0);
    const topopt::VtkData d = topopt::read_vtk(out / "state.vtk");
    EXPECT_EQ(d.point_data.at("y").cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cli, GradientCheckMeetsTolerance) {
    const Result r = run("grad-check --config " + data("gradcheck.cfg"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_LE(number_after(r.output, "finite differences:"), 1e-4) << r.output;
}

TEST(Cli, SolveThenCompare) {
    const fs::path out = scratch("run");
    const Result r = run("solve --config " + data("small_run.cfg") + " --dump-orbits --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"history.csv", "final_state.vtk", "final_g.vtk", "orbits.csv", "zero_level_y.csv",
                          "report.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto h = topopt::read_history_csv(out / "history.csv");
    ASSERT_EQ(h.size(), 4u);
    for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k].cost.total, h[k - 1].cost.total);

    // Three coarse iterations leave y > 0 up to the outer boundary, so there
    // is no closed zero level curve of y around E.
    const Result c = run("compare --config " + data("small_run.cfg") + " --out " + out.string());
    EXPECT_EQ(c.code, 2) << c.output;
    EXPECT_NE(c.output.find("empty"), std::string::npos) << c.output;
}

TEST(Cli, CompareOnTheExactDomain) {
    const fs::path out = scratch("exact");
    ASSERT_EQ(run("solve --config " + data("compare_fixture.cfg") + " --out " + out.string()).code, 0);
    const Result c = run("compare --config " + data("compare_fixture.cfg") + " --out " + out.string());
    ASSERT_EQ(c.code, 0) << c.output;
    EXPECT_TRUE(fs::exists(out / "compare.txt"));
    // g0 = |x| - 1 with f = 4: the Dirichlet solution on Ω_g is y_d up to discretization.
    EXPECT_LT(number_after(c.output, "omega_g_cost"), 2e-3);
    EXPECT_LT(number_after(c.output, "omega_g_cost_cut"), 1e-4);
    EXPECT_LE(number_after(c.output, "omega_g_cost"), number_after(c.output, "zero_level_cost"));
    EXPECT_NEAR(number_after(c.output, "omega_g_area_cut"), M_PI, 0.02);
}

TEST(Cli, CompareWithoutARunIsAnInputError) {
    const Result c = run("compare --config " + data("small_run.cfg") + " --out " + scratch("none").string());
    EXPECT_EQ(c.code, 1) << c.output;
}
