// Command-line front end: solve, compare and the per-module diagnostics.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include "topopt/compare.hpp"
#include "topopt/config.hpp"
#include "topopt/io.hpp"
#include "topopt/optimize.hpp"

namespace fs = std::filesystem;
using namespace topopt;

namespace {

constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;

/// Failure in a named stage of a numerical pipeline.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(fmt::format("{} failed: {}", stage, what)) {}
};

struct Options {
    fs::path config;
    std::optional<fs::path> out;
    std::optional<double> dt;
    std::optional<int> fixed_m;
    std::optional<std::string> direction;
    bool dump_orbits = false;
    bool verbose = false;
    int directions = 5;
    unsigned seed = 1;
};

struct Session {
    RunConfig cfg;
    std::optional<Mesh> mesh;
    std::optional<FemSystem> sys;
    Vector G0, U0;
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw StageError(name, e.what());
    }
}

Session open_session(const Options& o) {
    Session s;
    s.cfg = load_config(o.config);
    OptimizerConfig& opt = s.cfg.optimizer;
    if (o.out) s.cfg.out = *o.out;
    if (o.dt) opt.trace.dt = *o.dt;
    if (o.fixed_m) opt.trace.fixed_m = *o.fixed_m;
    if (o.direction) {
        try {
            opt.direction = parse_direction(*o.direction);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        opt.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    try {
        s.mesh.emplace(s.cfg.mesh.kind == MeshSpec::Kind::file ? read_mesh(s.cfg.mesh.file) : build_mesh(s.cfg.mesh));
    } catch (const MeshError& e) {
        throw ConfigError(fmt::format("[mesh] {}", e.what()));
    }
    s.sys.emplace(*s.mesh, s.cfg.problem(), s.cfg.solver());
    const Expr g0 = Expr::parse(s.cfg.g0), u0 = Expr::parse(s.cfg.u0);
    stage("evaluating g0/u0", [&] {
        s.G0 = interpolate_nodes(*s.mesh, [&](const Vec2& x) { return g0(x.x(), x.y()); });
        s.U0 = interpolate_nodes(*s.mesh, [&](const Vec2& x) { return u0(x.x(), x.y()); });
        return 0;
    });
    return s;
}

void check_admissible(const Session& s) {
    const AdmissibilityReport a = validate_admissible(*s.mesh, s.G0);
    if (a.ok()) return;
    std::string why;
    if (!a.boundary_positive) why += fmt::format(" g0 must be > 0 on the outer boundary (min {:.4g});", a.min_boundary);
    if (!a.observation_negative)
        why += fmt::format(" g0 must be < 0 on the observation region (max {:.4g});", a.max_observation);
    if (!a.gradient_nonzero) why += fmt::format(" |grad g0| vanishes on the zero level set (min {:.3g});", a.min_gradient);
    why.pop_back();
    throw StageError("admissibility check of g0", why);
}

fs::path prepare_out(const Session& s) {
    std::error_code ec;
    fs::create_directories(s.cfg.out, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", s.cfg.out.string(), ec.message()));
    return s.cfg.out;
}

double polyline_length(const Trajectory& Z) {
    double len = 0.0;
    for (int k = 0; k < Z.m(); ++k) len += (Z.Z[k + 1] - Z.Z[k]).norm();
    return len;
}

void print_mesh_summary(const Mesh& mesh) {
    fmt::print("mesh: {} vertices, {} triangles, {} interior, {} observation nodes, h = {:.4g}\n", mesh.num_vertices(),
               mesh.num_triangles(), mesh.num_interior(), mesh.num_observation(), mesh.h());
}

// ---- subcommands --------------------------------------------------------------

int cmd_solve(const Options& o) {
    Session s = open_session(o);
    check_admissible(s);
    const fs::path out = prepare_out(s);
    print_mesh_summary(*s.mesh);
    const OptimizerConfig& opt = s.cfg.optimizer;
    fmt::print("direction {}, eps {}, dt {}, fixed_m {}, {} worker thread(s)\n", to_string(opt.direction), s.cfg.eps,
               opt.trace.dt, opt.trace.fixed_m, worker_threads(opt.threads));

    auto on_iter = [&](const IterationRecord& r, const Evaluation& ev) {
        fmt::print("iter {:3d}  J = {:<14.8g} J1 = {:<12.6g} penalty = {:<12.6g} lambda = {:<10.4g} components = {}{}\n",
                   r.iter, r.cost.total, r.cost.J1, r.cost.penalty_sum(), r.lambda, r.components,
                   r.failed_trials ? fmt::format("  ({} trial(s) skipped)", r.failed_trials) : "");
        if (r.failed_trials && o.verbose) fmt::print("          first skipped trial: {}\n", r.first_failure);
        std::fflush(stdout);
        if (o.dump_orbits) write_orbits_csv(out / fmt::format("orbits_iter_{:03d}.csv", r.iter), ev.orbits);
    };
    const RunResult res = stage("optimization", [&] { return run(*s.sys, s.G0, s.U0, opt, on_iter); });
    const Evaluation& fin = res.final_eval;

    write_history_csv(out / "history.csv", res.history);
    write_vtk(out / "final_state.vtk", *s.mesh, {{"y", fin.Y_full}, {"u", fin.U}});
    write_vtk(out / "final_g.vtk", *s.mesh, {{"g", fin.G}});
    write_orbits_csv(out / "orbits.csv", fin.orbits);
    const auto y_zero = zero_level_segments(*s.mesh, fin.Y_full);
    write_segments_csv(out / "zero_level_y.csv", y_zero);

    const auto& first = res.history.front().cost;
    const auto& last = res.history.back().cost;
    auto report = fmt::output_file((out / "report.txt").string());
    report.print("config = {}\n", fs::absolute(o.config).string());
    report.print("vertices = {}\ntriangles = {}\n", s.mesh->num_vertices(), s.mesh->num_triangles());
    report.print("direction = {}\neps = {}\ndt = {}\nfixed_m = {}\n", to_string(opt.direction), s.cfg.eps,
                 opt.trace.dt, opt.trace.fixed_m);
    report.print("iterations = {}\nstop_reason = {}\n", res.history.back().iter, to_string(res.reason));
    report.print("J_initial = {:.10g}\nJ1_initial = {:.10g}\npenalty_initial = {:.10g}\n", first.total, first.J1,
                 first.penalty_sum());
    report.print("J_final = {:.10g}\nJ1_final = {:.10g}\npenalty_final = {:.10g}\n", last.total, last.J1,
                 last.penalty_sum());
    for (std::size_t c = 0; c < last.penalty.size(); ++c)
        report.print("penalty_component_{} = {:.10g}\n", c + 1, last.penalty[c]);
    double boundary = 0.0;
    for (const auto& Z : fin.orbits) boundary += polyline_length(Z);
    report.print("components = {}\nboundary_length = {:.10g}\n", fin.orbits.size(), boundary);
    report.print("zero_level_y_length = {:.10g}\n", total_length(y_zero));
    report.print("seconds = {:.2f}\n", res.history.back().seconds);

    fmt::print("stopped after {} iteration(s): {}\n", res.history.back().iter, to_string(res.reason));
    fmt::print("J: {:.8g} -> {:.8g}  (J1 {:.6g}, penalty integral {:.6g}, {} component(s), boundary length {:.6g})\n",
               first.total, last.total, last.J1, last.penalty_sum(), fin.orbits.size(), boundary);
    fmt::print("artifacts written to {}\n", out.string());
    return 0;
}

int cmd_compare(const Options& o) {
    Session s = open_session(o);
    const fs::path out = s.cfg.out;
    const VtkData g = read_vtk(out / "final_g.vtk");
    const VtkData y = read_vtk(out / "final_state.vtk");
    const int n = s.mesh->num_vertices();
    if (static_cast<int>(g.points.size()) != n || static_cast<int>(y.points.size()) != n || !g.point_data.count("g") ||
        !y.point_data.count("y"))
        throw IoError(fmt::format("{}: final fields do not match the configured mesh ({} vertices)", out.string(), n));

    const ProblemData data = s.cfg.problem();
    const Vector& G = g.point_data.at("g");
    const Vector& Y = y.point_data.at("y");
    const CompareReport tri = stage("comparison solves", [&] {
        return compare_domains(*s.sys, G, Y, DomainApprox::triangles, s.cfg.solver());
    });
    const CompareReport cut =
        stage("comparison solves", [&] { return compare_domains(*s.sys, G, Y, DomainApprox::cut, s.cfg.solver()); });
    std::optional<double> J1;
    if (fs::exists(out / "history.csv")) {
        const auto hist = read_history_csv(out / "history.csv");
        if (!hist.empty()) J1 = hist.back().cost.J1;
    }

    auto report = fmt::output_file((out / "compare.txt").string());
    auto emit = [&](const std::string& line) {
        fmt::print("{}\n", line);
        report.print("{}\n", line);
    };
    emit("# domains are unions of whole triangles selected by the sign at the centroid");
    emit(fmt::format("omega_g_cost = {:.10g}", tri.omega_g.J1));
    emit(fmt::format("zero_level_cost = {:.10g}", tri.zero_level.J1));
    if (J1) emit(fmt::format("penalized_J1 = {:.10g}", *J1));
    emit(fmt::format("omega_g_triangles = {}", tri.omega_g.triangles));
    emit(fmt::format("zero_level_triangles = {}", tri.zero_level.triangles));
    emit(fmt::format("omega_g_observation_coverage = {:.6f}", tri.omega_g.observation_coverage));
    emit(fmt::format("zero_level_observation_coverage = {:.6f}", tri.zero_level.observation_coverage));
    emit("# geometric error: the staircase boundary is within one element (h) of the level line;");
    emit("# the *_cut values clip the triangles along the P1 level line instead");
    emit(fmt::format("h = {:.6g}", s.mesh->h()));
    emit(fmt::format("omega_g_area = {:.10g}", tri.omega_g.area));
    emit(fmt::format("omega_g_area_cut = {:.10g}", cut.omega_g.area));
    emit(fmt::format("zero_level_area = {:.10g}", tri.zero_level.area));
    emit(fmt::format("zero_level_area_cut = {:.10g}", cut.zero_level.area));
    emit(fmt::format("omega_g_cost_cut = {:.10g}", cut.omega_g.J1));
    emit(fmt::format("zero_level_cost_cut = {:.10g}", cut.zero_level.J1));
    return 0;
}

int cmd_trace(const Options& o) {
    Session s = open_session(o);
    const fs::path out = prepare_out(s);
    const TraceOptions& t = s.cfg.optimizer.trace;
    const HamiltonianField field(*s.mesh, s.sys->pi(), s.G0);
    const auto orbits = stage("orbit tracing", [&] { return trace_components(field, t); });
    for (const auto& Z : orbits) {
        double drift = 0.0;
        const double g_start = interpolate(*s.mesh, s.G0, Z.loc[0]);
        for (const auto& loc : Z.loc) drift = std::max(drift, std::abs(interpolate(*s.mesh, s.G0, loc) - g_start));
        fmt::print("component {}: seed ({:.6g}, {:.6g}), m = {}, dt = {:.6g}, period = {:.8g}, length = {:.8g}, "
                   "max |g(Z_k) - g(Z_0)| = {:.3e}\n",
                   Z.component, Z.seed.x(), Z.seed.y(), Z.m(), Z.dt, Z.period(), polyline_length(Z), drift);
    }
    write_orbits_csv(out / "orbits.csv", orbits);
    fmt::print("{} component(s) written to {}\n", orbits.size(), (out / "orbits.csv").string());
    return 0;
}

int cmd_state(const Options& o) {
    Session s = open_session(o);
    const fs::path out = prepare_out(s);
    print_mesh_summary(*s.mesh);
    const Vector Y = stage("state solve", [&] { return extend_interior(*s.mesh, solve_state(*s.sys, s.G0, s.U0)); });
    write_vtk(out / "state.vtk", *s.mesh, {{"y", Y}, {"g", s.G0}, {"u", s.U0}});
    fmt::print("J1 = {:.10g}, max |y| = {:.6g}\n", eval_J1(*s.sys, Y), Y.lpNorm<Eigen::Infinity>());
    try {
        const Evaluation ev = evaluate(*s.sys, s.G0, s.U0, s.cfg.optimizer.trace);
        fmt::print("penalty integral = {:.10g} over {} component(s), J = {:.10g}\n", ev.cost.penalty_sum(),
                   ev.orbits.size(), ev.cost.total);
    } catch (const TraceError& e) {
        fmt::print("penalty not evaluated: {}\n", e.what());
    }
    fmt::print("state written to {}\n", (out / "state.vtk").string());
    return 0;
}

/// Smooth random nodal field a + b x1 + c x2 + d sin(1.3 x1 + e x2) + 0.2 e x1 x2.
Vector smooth_direction(const Mesh& mesh, std::mt19937& rng) {
    std::uniform_real_distribution<double> U(-1, 1);
    const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e = U(rng);
    return interpolate_nodes(mesh, [=](const Vec2& x) {
        return a + b * x.x() + c * x.y() + d * std::sin(1.3 * x.x() + e * x.y()) + 0.2 * e * x.x() * x.y();
    });
}

int cmd_grad_check(const Options& o) {
    Session s = open_session(o);
    check_admissible(s);
    print_mesh_summary(*s.mesh);
    // Finite differences need a much tighter linear solve than the optimizer.
    const FemSystem sys = s.sys->with_solver({std::min(s.cfg.cg_tol, 1e-13), 10});
    const TraceOptions& t = s.cfg.optimizer.trace;
    const Evaluation ev = stage("evaluation at (g0, u0)", [&] { return evaluate(sys, s.G0, s.U0, t); });
    const Vector P = stage("adjoint solve", [&] { return compute_adjoint(sys, ev); });
    const auto pins = pins_of(ev.orbits);
    fmt::print("J = {:.10g} with {} component(s); orbits pinned for the finite differences\n", ev.cost.total,
               ev.orbits.size());

    std::mt19937 rng(o.seed);
    const double lam = 1e-6;
    double worst = 0.0;
    fmt::print("{:>3}  {:>16}  {:>16}  {:>10}  {:>16}  {:>10}  {:>16}  {:>10}\n", "dir", "fd", "consistent", "rel",
               "recovered", "rel", "operator", "rel/asm");
    for (int d = 0; d < o.directions; ++d) {
        const Vector R = smooth_direction(*s.mesh, rng), V = smooth_direction(*s.mesh, rng);
        const double fd = stage("finite differences", [&] {
            const double jp = evaluate(sys, s.G0 + lam * R, s.U0 + lam * V, t, &pins).cost.total;
            const double jm = evaluate(sys, s.G0 - lam * R, s.U0 - lam * V, t, &pins).cost.total;
            return (jp - jm) / (2 * lam);
        });
        const double con = dJ_assembled(sys, ev, R, V, Linearization::consistent).total();
        const double rec = dJ_assembled(sys, ev, R, V, Linearization::recovered).total();
        const double op = dJ_operator(sys, ev, P, R, V, Linearization::recovered).total();
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
        worst = std::max(worst, rel(con, fd));
        fmt::print("{:>3}  {:>16.9g}  {:>16.9g}  {:>10.2e}  {:>16.9g}  {:>10.2e}  {:>16.9g}  {:>10.2e}\n", d, fd, con,
                   rel(con, fd), rec, rel(rec, fd), op, rel(op, rec));
    }
    fmt::print("max relative error of the consistent derivative vs finite differences: {:.3e}\n", worst);
    return 0;
}

int cmd_mesh(const Options& o) {
    Session s = open_session(o);
    const fs::path out = prepare_out(s);
    print_mesh_summary(*s.mesh);
    write_mesh(out / "mesh.txt", *s.mesh);
    write_vtk(out / "mesh.vtk", *s.mesh, {{"g0", s.G0}});
    fmt::print("mesh written to {} and {}\n", (out / "mesh.txt").string(), (out / "mesh.vtk").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Level-set shape and topology optimization on a fixed domain"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides [output] dir)");
        sub->add_option("--dt", o.dt, "orbit time step");
        sub->add_option("--fixed-m", o.fixed_m, "retrace every orbit with exactly this many intervals");
    };
    auto* solve = app.add_subcommand("solve", "run the optimization and write all artifacts");
    add_common(solve);
    solve->add_option("--direction", o.direction, "descent direction")
        ->check(CLI::IsMember({"adjoint41", "rstar", "full42"}));
    solve->add_flag("--dump-orbits", o.dump_orbits, "write the orbits of every iterate");
    solve->add_flag("-v,--verbose", o.verbose, "explain skipped line-search trials");
    auto* compare = app.add_subcommand("compare", "Dirichlet solves on the final domains of a finished run");
    add_common(compare);
    auto* trace = app.add_subcommand("trace", "trace the zero level set of g0");
    add_common(trace);
    auto* state = app.add_subcommand("state", "solve the state equation for (g0, u0)");
    add_common(state);
    auto* grad = app.add_subcommand("grad-check", "compare derivative forms with finite differences");
    add_common(grad);
    grad->add_option("--directions", o.directions, "number of random directions")->check(CLI::PositiveNumber);
    grad->add_option("--seed", o.seed, "random seed");
    auto* mesh = app.add_subcommand("mesh", "build the configured mesh and write it out");
    add_common(mesh);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (solve->parsed()) return cmd_solve(o);
        if (compare->parsed()) return cmd_compare(o);
        if (trace->parsed()) return cmd_trace(o);
        if (state->parsed()) return cmd_state(o);
        if (grad->parsed()) return cmd_grad_check(o);
        if (mesh->parsed()) return cmd_mesh(o);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const ExprSyntaxError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const IoError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return kConfigError;
    } catch (const StageError& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumericalError;
    } catch (const std::system_error& e) {
        fmt::print(stderr, "i/o error: {}\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumericalError;
    }
    return 0;
}
