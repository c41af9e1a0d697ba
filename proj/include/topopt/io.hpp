#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "topopt/levelset.hpp"
#include "topopt/mesh.hpp"
#include "topopt/optimize.hpp"

namespace topopt {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- mesh files ---------------------------------------------------------------
//
//   vertices <n>
//   <x1> <x2> <on_boundary 0|1>      (n lines)
//   triangles <m>
//   <a> <b> <c> <label 0|1>          (m lines, 0-based, label 1 = E)
//
// Lines starting with '#' are comments.

Mesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

// ---- legacy VTK (ASCII unstructured grid) ---------------------------------------

struct VtkField {
    std::string name;
    Vector values;
};

struct VtkData {
    std::vector<Vec2> points;
    std::vector<std::array<int, 3>> triangles;
    std::map<std::string, Vector> point_data;
    std::map<std::string, Vector> cell_data;
};

/// Points, triangles, the region label as cell data, and the given nodal fields.
void write_vtk(const std::filesystem::path& path, const Mesh& mesh, const std::vector<VtkField>& fields);
VtkData read_vtk(const std::filesystem::path& path);

// ---- CSV artifacts -------------------------------------------------------------

/// iter, J1, penalty_1..penalty_C, total, lambda, gamma, slope, r_norm, v_norm,
/// components, failed_trials, seconds. C is the largest component count seen;
/// shorter rows leave the extra penalty cells empty.
void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history);
std::vector<IterationRecord> read_history_csv(const std::filesystem::path& path);

/// component, k, t, x1, x2 for every orbit point (Z_m repeats Z_0).
void write_orbits_csv(const std::filesystem::path& path, const std::vector<Trajectory>& orbits);
std::vector<Trajectory> read_orbits_csv(const std::filesystem::path& path);

/// Piecewise-linear zero set of a P1 field, one segment per cut triangle.
struct Segment {
    Vec2 a, b;
};
std::vector<Segment> zero_level_segments(const Mesh& mesh, const Vector& nodal);
void write_segments_csv(const std::filesystem::path& path, const std::vector<Segment>& segments);
double total_length(const std::vector<Segment>& segments);

}  // namespace topopt
