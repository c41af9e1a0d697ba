#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "topopt/fem.hpp"

namespace topopt {

class SubmeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Triangle subset of a parent mesh, renumbered, with its own outer boundary.
struct Submesh {
    Mesh mesh;
    std::vector<int> parent_vertex;    ///< submesh vertex -> parent vertex, -1 for cut points
    std::vector<int> parent_triangle;  ///< submesh triangle -> parent triangle containing it
    double observation_coverage = 1.0;  ///< area fraction of E inside the submesh
};

/// Triangles satisfying `keep` that are connected (through edges) to an
/// observation triangle satisfying `keep`. Throws SubmeshError if no
/// observation triangle qualifies or the set reaches the outer boundary of the
/// parent (the level set then does not enclose E).
Submesh extract_submesh(const Mesh& parent, const std::function<bool(int)>& keep, const std::string& what);

/// The part of {phi < 0} (phi P1 on the parent) connected to E, with triangles
/// crossed by the zero level cut along it, so the boundary is the P1 zero line
/// rather than a staircase. Vertices whose nearest crossing is within 10% of an
/// edge are moved onto it first to avoid slivers. Same errors as extract_submesh.
Submesh clip_to_level(const Mesh& parent, const Vector& phi, const std::string& what);

/// -Δy = f on the submesh with y = 0 on its boundary. The solution is extended
/// by zero to the parent mesh; the cost ∫_E j(x, y) integrates the submesh's
/// E-labeled triangles plus j(x, 0) on the part of E left out.
struct DirichletResult {
    double J1 = 0.0;
    int triangles = 0;
    int vertices = 0;
    double observation_coverage = 1.0;
    double area = 0.0;  ///< of the submesh
    Vector Y;         ///< on the submesh
    Vector Y_parent;  ///< zero-extended to the parent mesh
};
DirichletResult solve_dirichlet_on(const Submesh& sub, const FemSystem& parent, const SolverOptions& solver = {});

struct CompareReport {
    DirichletResult omega_g;     ///< {g_h < 0}
    DirichletResult zero_level;  ///< {y_h > 0}
};

/// How a domain {phi < 0} is represented on the hold-all mesh.
enum class DomainApprox {
    triangles,  ///< whole triangles with phi < 0 at the centroid (staircase boundary, O(h))
    cut,        ///< triangles clipped along the P1 zero line (O(h²))
};

/// Both comparison solves for a final (G, Y) on the hold-all mesh.
CompareReport compare_domains(const FemSystem& sys, const Vector& G, const Vector& Y_full,
                              DomainApprox approx = DomainApprox::triangles,
                              const SolverOptions& solver = {});

}  // namespace topopt
