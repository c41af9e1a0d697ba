#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "topopt/fem.hpp"
#include "topopt/optimize.hpp"

namespace topopt {

/// Missing, malformed or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How the hold-all mesh is obtained.
struct MeshSpec {
    enum class Kind { file, rect, disk } kind = Kind::rect;
    std::filesystem::path file;
    Rect bounds{-3, 3, -3, 3};
    int cells_x = 80, cells_y = 80;
    Vec2 center{0, 0};  ///< disk hold-all
    double radius = 1.0;
    int rings = 16, sectors = 6;
    // Observation region E: a regular polygon inscribed in a circle.
    Vec2 e_center{0, 0};
    double e_radius = 0.5;
    int e_sides = 32;
};

Mesh build_mesh(const MeshSpec& spec);

struct RunConfig {
    std::filesystem::path source;  ///< config file, for messages
    std::string f, yd, j = "(y-yd)^2", j2 = "2*(y-yd)";
    std::string g0, u0 = "0";
    double eps = 0.1;
    MedDomain med_domain = MedDomain::hold_all;
    double cg_tol = 1e-10;
    MeshSpec mesh;
    OptimizerConfig optimizer;
    std::filesystem::path out = "out";

    ProblemData problem() const;
    SolverOptions solver() const { return {cg_tol, 10}; }
};

/// INI-style file with sections [problem], [mesh], [optimizer], [orbit], [output].
/// Relative mesh file paths resolve against the config file's directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& source = "<string>");

}  // namespace topopt
