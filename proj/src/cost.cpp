#include "topopt/cost.hpp"

#include <numeric>

#include "topopt/quadrature.hpp"

namespace topopt {

using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

/// Adds weight * φ_a φ_b over interior pairs of the sample's triangle.
/// Column indices are interior (cols_interior) or global.
void add_local(const Mesh& mesh, const Location& loc, double weight, bool cols_interior, Triplets& trip) {
    const auto& tri = mesh.triangle(loc.triangle);
    for (int a = 0; a < 3; ++a) {
        const int i = mesh.interior_index(tri[a]);
        if (i < 0 || loc.bary[a] == 0.0) continue;
        for (int b = 0; b < 3; ++b) {
            const int j = cols_interior ? mesh.interior_index(tri[b]) : tri[b];
            if (j < 0 || loc.bary[b] == 0.0) continue;
            trip.emplace_back(i, j, weight * loc.bary[a] * loc.bary[b]);
        }
    }
}

SparseMatrix from_triplets(int rows, int cols, const Triplets& trip) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace

CurveQuadrature build_curve_quadrature(const Mesh& mesh, const Trajectory& Z) {
    CurveQuadrature cq;
    cq.m = Z.m();
    cq.points.reserve(3 * static_cast<std::size_t>(cq.m));
    for (int k = 0; k < cq.m; ++k) {
        const Vec2 d = Z.Z[k + 1] - Z.Z[k];
        const double len = d.norm();
        int hint = Z.loc[k].triangle;
        for (const auto& g : quadrature::gauss3) {
            const Location loc = mesh.locate(Z.Z[k] + g.s * d, hint);
            hint = loc.triangle;
            cq.points.push_back({loc, g.weight * len, g.s, k});
        }
    }
    return cq;
}

SparseMatrix assemble_N(const Mesh& mesh, const CurveQuadrature& cq) {
    Triplets trip;
    trip.reserve(9 * cq.points.size());
    for (const auto& p : cq.points) add_local(mesh, p.loc, p.weight, true, trip);
    return from_triplets(mesh.num_interior(), mesh.num_interior(), trip);
}

Vector apply_N(const Mesh& mesh, const CurveQuadrature& cq, const Vector& Y_full) {
    Vector out = Vector::Zero(mesh.num_interior());
    for (const auto& p : cq.points) {
        const double wy = p.weight * interpolate(mesh, Y_full, p.loc);
        const auto& tri = mesh.triangle(p.loc.triangle);
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.interior_index(tri[a]);
            if (i >= 0) out[i] += wy * p.loc.bary[a];
        }
    }
    return out;
}

double penalty_integral(const Mesh& mesh, const CurveQuadrature& cq, const Vector& Y_full) {
    double acc = 0.0;
    for (const auto& p : cq.points) {
        const double y = interpolate(mesh, Y_full, p.loc);
        acc += p.weight * y * y;
    }
    return acc;
}

std::pair<SparseMatrix, SparseMatrix> apply_T1_T2(const Mesh& mesh, const CurveQuadrature& cq,
                                                  const std::vector<Vec2>& W) {
    Triplets t1, t2;
    for (const auto& p : cq.points) {
        const Vec2 w = (1.0 - p.s) * W[p.interval] + p.s * W[p.interval + 1];
        add_local(mesh, p.loc, p.weight * w.x(), false, t1);
        add_local(mesh, p.loc, p.weight * w.y(), false, t2);
    }
    return {from_triplets(mesh.num_interior(), mesh.num_vertices(), t1),
            from_triplets(mesh.num_interior(), mesh.num_vertices(), t2)};
}

SparseMatrix apply_T3(const Mesh& mesh, const CurveQuadrature& cq, const Trajectory& Z,
                      const std::vector<Vec2>& W) {
    Triplets trip;
    for (const auto& p : cq.points) {
        const int k = p.interval;
        const Vec2 dz = Z.Z[k + 1] - Z.Z[k];
        const double c = dz.dot(W[k + 1] - W[k]) / dz.squaredNorm();
        add_local(mesh, p.loc, p.weight * c, true, trip);
    }
    return from_triplets(mesh.num_interior(), mesh.num_interior(), trip);
}

double CostBreakdown::penalty_sum() const { return std::accumulate(penalty.begin(), penalty.end(), 0.0); }

double eval_J1(const FemSystem& sys, const Vector& Y_full, const std::function<bool(int)>& include) {
    const Mesh& mesh = sys.mesh();
    double acc = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        if (mesh.region(t) != Region::observation || (include && !include(t))) continue;
        const auto& tri = mesh.triangle(t);
        double local = 0.0;
        for (const auto& q : quadrature::degree4) {
            const Vec2 x = q.bary[0] * mesh.vertex(tri[0]) + q.bary[1] * mesh.vertex(tri[1]) +
                           q.bary[2] * mesh.vertex(tri[2]);
            const double y = q.bary[0] * Y_full[tri[0]] + q.bary[1] * Y_full[tri[1]] + q.bary[2] * Y_full[tri[2]];
            local += q.weight * sys.data().j(ExprVars{x[0], x[1], y, sys.data().yd(x[0], x[1])});
        }
        acc += local * mesh.area(t);
    }
    return acc;
}

CostBreakdown eval_cost(const FemSystem& sys, const Vector& Y_full, const std::vector<CurveQuadrature>& curves) {
    CostBreakdown c;
    c.eps = sys.eps();
    c.J1 = eval_J1(sys, Y_full);
    for (const auto& cq : curves) c.penalty.push_back(penalty_integral(sys.mesh(), cq, Y_full));
    c.total = c.J1 + c.penalty_sum() / c.eps;
    return c;
}

}  // namespace topopt
