#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace topopt {

using Vec2 = Eigen::Vector2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Polygon = std::vector<Vec2>;

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by point location when a point lies outside the hold-all.
class OutsideDomainError : public MeshError {
public:
    explicit OutsideDomainError(const Vec2& p);
    Vec2 point;
};

/// Region label of a triangle: inside the observation set or in its complement.
enum class Region : int { complement = 0, observation = 1 };

struct Rect {
    double xmin, xmax, ymin, ymax;
};

/// Containing triangle and barycentric coordinates of a located point.
struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// Fixed triangulation of the hold-all D, labeled compatibly with E.
///
/// Node index sets: all nodes I (0..n-1), interior nodes I0 (not on the outer
/// boundary) and observation nodes I_E (vertices of E-labeled triangles). Each
/// node carries its position in I0 and I_E, or -1.
class Mesh {
public:
    Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
         std::vector<Region> labels, std::vector<bool> boundary);

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_triangles() const { return static_cast<int>(triangles_.size()); }
    int num_interior() const { return static_cast<int>(interior_nodes_.size()); }
    int num_observation() const { return static_cast<int>(observation_nodes_.size()); }

    const Vec2& vertex(int i) const { return vertices_[i]; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
    Region region(int t) const { return labels_[t]; }
    bool on_boundary(int i) const { return boundary_[i]; }
    double area(int t) const { return areas_[t]; }
    double h() const { return h_; }
    const Rect& bounding_box() const { return bbox_; }

    /// Constant gradients of the three hat functions of triangle t.
    const std::array<Vec2, 3>& hat_gradients(int t) const { return hat_grads_[t]; }
    /// Triangles incident to vertex i, in increasing index order.
    const std::vector<int>& vertex_star(int i) const { return stars_[i]; }
    /// Neighbor across the edge opposite local vertex k, or -1 on the boundary.
    int neighbor(int t, int k) const { return neighbors_[t][k]; }

    const std::vector<int>& interior_nodes() const { return interior_nodes_; }
    const std::vector<int>& observation_nodes() const { return observation_nodes_; }
    int interior_index(int i) const { return interior_index_[i]; }
    int observation_index(int i) const { return observation_index_[i]; }

    /// Barycentric coordinates of p relative to triangle t (may be negative).
    std::array<double, 3> barycentric(int t, const Vec2& p) const;

    /// Walks from `hint` towards p, falling back to the bucket grid. Points on
    /// shared edges or vertices resolve to the lowest-index containing triangle.
    Location locate(const Vec2& p, int hint = 0) const;

private:
    void validate() const;
    void build_topology();
    void build_buckets();
    int bucket_search(const Vec2& p) const;
    int lowest_containing(int t, const Vec2& p) const;

    std::vector<Vec2> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<Region> labels_;
    std::vector<bool> boundary_;

    std::vector<double> areas_;
    std::vector<std::array<Vec2, 3>> hat_grads_;
    std::vector<std::vector<int>> stars_;
    std::vector<std::array<int, 3>> neighbors_;
    std::vector<int> interior_nodes_, observation_nodes_;
    std::vector<int> interior_index_, observation_index_;
    double h_ = 0.0;
    Rect bbox_{};

    int bucket_nx_ = 1, bucket_ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Structured union-jack triangulation of a rectangle with nx-by-ny cells.
/// A triangle is labeled E iff its barycenter lies inside `e_polygon`.
Mesh generate_rect_mesh(const Rect& bounds, int nx, int ny, const Polygon& e_polygon);

/// Concentric-ring triangulation of a disk: ring j carries j*sectors nodes, so
/// the outer boundary is a (rings*sectors)-gon inscribed in the circle.
Mesh generate_disk_mesh(const Vec2& center, double radius, int rings, int sectors,
                        const Polygon& e_polygon = {});

/// Regular polygon inscribed in the circle, counter-clockwise from angle 0.
Polygon regular_polygon(const Vec2& center, double radius, int sides);

bool point_in_polygon(const Polygon& poly, const Vec2& p);

/// Flags the endpoints of edges that belong to exactly one triangle.
std::vector<bool> topological_boundary(int num_vertices, const std::vector<std::array<int, 3>>& triangles);

/// Area-weighted averages of the per-triangle gradients of P1 functions.
struct DiscreteDerivativeOps {
    SparseMatrix pi1;  ///< n x n, recovered d/dx1
    SparseMatrix pi2;  ///< n x n, recovered d/dx2
};

DiscreteDerivativeOps build_pih(const Mesh& mesh);

/// P1 interpolation of a nodal vector (size n) at a located point.
double interpolate(const Mesh& mesh, const Vector& nodal, const Location& loc);

/// Exact gradient of the P1 function `nodal` on triangle t.
Vec2 element_gradient(const Mesh& mesh, const Vector& nodal, int t);

/// Nodal interpolant (size n) of a callable f(Vec2) -> double.
template <class F>
Vector interpolate_nodes(const Mesh& mesh, F&& f) {
    Vector out(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) out[i] = f(mesh.vertex(i));
    return out;
}

/// Zero-extends an interior vector (size n0) to all nodes.
Vector extend_interior(const Mesh& mesh, const Vector& interior);
/// Restricts an all-node vector to I0.
Vector restrict_interior(const Mesh& mesh, const Vector& full);

}  // namespace topopt
