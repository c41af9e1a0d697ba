#include "topopt/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace topopt {

namespace pt = boost::property_tree;

Mesh build_mesh(const MeshSpec& spec) {
    const Polygon e = regular_polygon(spec.e_center, spec.e_radius, spec.e_sides);
    switch (spec.kind) {
        case MeshSpec::Kind::rect: return generate_rect_mesh(spec.bounds, spec.cells_x, spec.cells_y, e);
        case MeshSpec::Kind::disk: return generate_disk_mesh(spec.center, spec.radius, spec.rings, spec.sectors, e);
        case MeshSpec::Kind::file: break;
    }
    throw ConfigError("build_mesh: file meshes are loaded with read_mesh");
}

namespace {

Expr parse_field(const std::string& key, const std::string& text, VarSet vars) {
    try {
        return Expr::parse(text, vars);
    } catch (const ExprSyntaxError& e) {
        throw ConfigError(fmt::format("[problem] {}: {} (at character {} of '{}')", key, e.what(), e.offset, text));
    }
}

/// Reads one section, remembering which keys were consumed so leftovers can be
/// reported as typos.
class Section {
public:
    Section(const pt::ptree& root, std::string name, const std::filesystem::path& source)
        : name_(std::move(name)), source_(source) {
        if (auto child = root.get_child_optional(name_)) tree_ = *child;
    }

    bool has(const std::string& key) const { return tree_.count(key) > 0; }

    std::string str(const std::string& key) {
        used_.insert(key);
        auto v = tree_.get_optional<std::string>(key);
        if (!v) throw ConfigError(fmt::format("{}: missing required field [{}] {}", source_.string(), name_, key));
        return *v;
    }
    std::string str(const std::string& key, const std::string& fallback) {
        return has(key) ? str(key) : (used_.insert(key), fallback);
    }

    template <class T>
    T num(const std::string& key) {
        const std::string s = str(key);
        std::istringstream ss(s);
        T v{};
        if (!(ss >> v) || !(ss >> std::ws).eof())
            throw ConfigError(fmt::format("{}: [{}] {}: '{}' is not a valid number", source_.string(), name_, key, s));
        return v;
    }
    template <class T>
    T num(const std::string& key, T fallback) {
        return has(key) ? num<T>(key) : (used_.insert(key), fallback);
    }

    std::vector<double> list(const std::string& key, std::size_t count) {
        const std::string s = str(key);
        std::istringstream ss(s);
        std::vector<double> v;
        for (double x; ss >> x;) v.push_back(x);
        if (v.size() != count || !ss.eof())
            throw ConfigError(fmt::format("{}: [{}] {}: expected {} numbers, got '{}'", source_.string(), name_, key,
                                          count, s));
        return v;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : tree_)
            if (!used_.count(key))
                throw ConfigError(fmt::format("{}: unknown field [{}] {}", source_.string(), name_, key));
    }

private:
    pt::ptree tree_;
    std::string name_;
    std::filesystem::path source_;
    std::set<std::string> used_;
};

}  // namespace

ProblemData RunConfig::problem() const {
    ProblemData d;
    d.f = parse_field("f", f, VarSet::spatial);
    d.yd = parse_field("yd", yd, VarSet::spatial);
    d.j = parse_field("j", j, VarSet::state);
    d.j2 = parse_field("j2", j2, VarSet::state);
    d.eps = eps;
    d.med_domain = med_domain;
    return d;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& source) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}:{}: {}", source.string(), e.line(), e.message()));
    }
    for (const auto& [name, sub] : root)
        if (name != "problem" && name != "mesh" && name != "optimizer" && name != "orbit" && name != "output")
            throw ConfigError(fmt::format("{}: unknown section [{}]", source.string(), name));

    RunConfig c;
    c.source = source;

    Section problem(root, "problem", source);
    c.f = problem.str("f");
    c.yd = problem.str("yd");
    c.j = problem.str("j", c.j);
    c.j2 = problem.str("j2", c.j2);
    c.g0 = problem.str("g0");
    c.u0 = problem.str("u0", c.u0);
    c.eps = problem.num<double>("eps");
    if (!(c.eps > 0)) throw ConfigError(fmt::format("{}: [problem] eps must be > 0", source.string()));
    const std::string med = problem.str("med_domain", "D");
    if (med == "D")
        c.med_domain = MedDomain::hold_all;
    else if (med == "E")
        c.med_domain = MedDomain::observation;
    else
        throw ConfigError(fmt::format("{}: [problem] med_domain must be D or E, got '{}'", source.string(), med));
    c.cg_tol = problem.num<double>("cg_tol", c.cg_tol);
    problem.reject_unknown();
    c.problem();  // all expressions must parse
    parse_field("g0", c.g0, VarSet::spatial);
    parse_field("u0", c.u0, VarSet::spatial);

    Section mesh(root, "mesh", source);
    MeshSpec& m = c.mesh;
    const std::string type = mesh.str("type", "rect");
    if (type == "file") {
        m.kind = MeshSpec::Kind::file;
        m.file = mesh.str("file");
        if (m.file.is_relative()) m.file = source.parent_path() / m.file;
    } else if (type == "rect") {
        m.kind = MeshSpec::Kind::rect;
        if (mesh.has("bounds")) {
            const auto b = mesh.list("bounds", 4);
            m.bounds = {b[0], b[1], b[2], b[3]};
        }
        m.cells_x = m.cells_y = mesh.num<int>("cells", m.cells_x);
        m.cells_x = mesh.num<int>("cells_x", m.cells_x);
        m.cells_y = mesh.num<int>("cells_y", m.cells_y);
    } else if (type == "disk") {
        m.kind = MeshSpec::Kind::disk;
        if (mesh.has("center")) {
            const auto v = mesh.list("center", 2);
            m.center = {v[0], v[1]};
        }
        m.radius = mesh.num<double>("radius", m.radius);
        m.rings = mesh.num<int>("rings", m.rings);
        m.sectors = mesh.num<int>("sectors", m.sectors);
    } else {
        throw ConfigError(fmt::format("{}: [mesh] type must be rect, disk or file, got '{}'", source.string(), type));
    }
    if (mesh.has("observation_center")) {
        const auto v = mesh.list("observation_center", 2);
        m.e_center = {v[0], v[1]};
    }
    m.e_radius = mesh.num<double>("observation_radius", m.e_radius);
    m.e_sides = mesh.num<int>("observation_sides", m.e_sides);
    mesh.reject_unknown();

    Section opt(root, "optimizer", source);
    OptimizerConfig& o = c.optimizer;
    try {
        o.direction = parse_direction(opt.str("direction", to_string(o.direction)));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("{}: [optimizer] {}", source.string(), e.what()));
    }
    const std::string lin = opt.str("linearization", "recovered");
    if (lin == "recovered")
        o.linearization = Linearization::recovered;
    else if (lin == "consistent")
        o.linearization = Linearization::consistent;
    else
        throw ConfigError(fmt::format("{}: [optimizer] linearization must be recovered or consistent, got '{}'",
                                      source.string(), lin));
    o.tol = opt.num<double>("tol", o.tol);
    o.max_iters = opt.num<int>("max_iters", o.max_iters);
    o.lambda0 = opt.num<double>("lambda0", o.lambda0);
    o.rho = opt.num<double>("rho", o.rho);
    o.trials = opt.num<int>("trials", o.trials);
    o.projection_value = opt.num<double>("projection_value", o.projection_value);
    o.threads = opt.num<int>("threads", o.threads);
    opt.reject_unknown();

    Section orbit(root, "orbit", source);
    TraceOptions& t = o.trace;
    t.dt = orbit.num<double>("dt", t.dt);
    t.fixed_m = orbit.num<int>("fixed_m", t.fixed_m);
    t.min_steps = orbit.num<int>("min_steps", t.min_steps);
    t.max_steps = orbit.num<int>("max_steps", t.max_steps);
    t.closure_factor = orbit.num<double>("closure_factor", t.closure_factor);
    t.claim_factor = orbit.num<double>("claim_factor", t.claim_factor);
    orbit.reject_unknown();

    Section output(root, "output", source);
    c.out = output.str("dir", c.out.string());
    output.reject_unknown();

    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("{}: {}", source.string(), e.what()));
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace topopt
