#include "topopt/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <fmt/format.h>

#include "topopt/quadrature.hpp"

namespace topopt {

using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

SparseMatrix from_triplets(int rows, int cols, const Triplets& trip) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

Vec2 point_at(const Mesh& mesh, int t, const std::array<double, 3>& b) {
    const auto& tri = mesh.triangle(t);
    return b[0] * mesh.vertex(tri[0]) + b[1] * mesh.vertex(tri[1]) + b[2] * mesh.vertex(tri[2]);
}

double value_at(const Vector& nodal, const std::array<int, 3>& tri, const std::array<double, 3>& b) {
    return b[0] * nodal[tri[0]] + b[1] * nodal[tri[1]] + b[2] * nodal[tri[2]];
}

}  // namespace

SpdSolver::SpdSolver(SparseMatrix K, SolverOptions opts) : K_(std::move(K)), opts_(opts) {
    if (K_.rows() != K_.cols()) throw SolverError("solve_spd: matrix is not square");
}

Vector SpdSolver::solve(const Vector& b) const {
    if (b.size() != K_.rows())
        throw SolverError(fmt::format("solve_spd: right side has size {}, expected {}", b.size(), K_.rows()));
    if (K_.rows() == 0 || b.squaredNorm() == 0.0) return Vector::Zero(b.size());

    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts_.rel_tol);
    cg.setMaxIterations(std::max<Eigen::Index>(1, opts_.max_iter_factor * K_.rows()));
    cg.compute(K_);
    Vector x = cg.solve(b);
    if (cg.info() != Eigen::Success || !x.allFinite())
        throw SolverError(fmt::format("conjugate gradients did not converge: {} iterations, relative residual {:.3e}",
                                      cg.iterations(), cg.error()));
    return x;
}

Vector solve_spd(const SparseMatrix& K, const Vector& b, const SolverOptions& opts) {
    return SpdSolver(K, opts).solve(b);
}

SparseMatrix assemble_stiffness(const Mesh& mesh) {
    Triplets trip;
    trip.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        const auto& grad = mesh.hat_gradients(t);
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.interior_index(tri[a]);
            if (i < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int j = mesh.interior_index(tri[b]);
                if (j < 0) continue;
                trip.emplace_back(i, j, mesh.area(t) * grad[a].dot(grad[b]));
            }
        }
    }
    return from_triplets(mesh.num_interior(), mesh.num_interior(), trip);
}

SparseMatrix assemble_mass(const Mesh& mesh) {
    Triplets trip;
    trip.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(tri[a], tri[b], mesh.area(t) * (a == b ? 2.0 : 1.0) / 12.0);
    }
    return from_triplets(mesh.num_vertices(), mesh.num_vertices(), trip);
}

Vector assemble_load(const Mesh& mesh, const Expr& f) {
    Vector F = Vector::Zero(mesh.num_interior());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        for (const auto& q : quadrature::midpoint) {
            const Vec2 x = point_at(mesh, t, q.bary);
            const double fx = f(x[0], x[1]) * q.weight * mesh.area(t);
            for (int a = 0; a < 3; ++a) {
                const int i = mesh.interior_index(tri[a]);
                if (i >= 0) F[i] += fx * q.bary[a];
            }
        }
    }
    return F;
}

SparseMatrix assemble_weighted_mass(const Mesh& mesh, const PointWeight& weight) {
    Triplets trip;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        double local[3][3] = {};
        bool any = false;
        for (const auto& q : quadrature::degree4) {
            const double w = weight(t, q.bary, point_at(mesh, t, q.bary));
            if (w == 0.0) continue;
            any = true;
            const double s = w * q.weight * mesh.area(t);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) local[a][b] += s * q.bary[a] * q.bary[b];
        }
        if (!any) continue;
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.interior_index(tri[a]);
            if (i < 0) continue;
            for (int b = 0; b < 3; ++b) trip.emplace_back(i, tri[b], local[a][b]);
        }
    }
    return from_triplets(mesh.num_interior(), mesh.num_vertices(), trip);
}

SparseMatrix assemble_B1(const Mesh& mesh, const Vector& G, double eps) {
    return assemble_weighted_mass(mesh, [&](int t, const std::array<double, 3>& b, const Vec2&) {
        const double s = std::max(0.0, value_at(G, mesh.triangle(t), b) + eps);
        return s * s;
    });
}

SparseMatrix assemble_C1(const Mesh& mesh, const Vector& G, double eps, const Vector& U) {
    return assemble_weighted_mass(mesh, [&](int t, const std::array<double, 3>& b, const Vec2&) {
        const auto& tri = mesh.triangle(t);
        const double s = std::max(0.0, value_at(G, tri, b) + eps);
        return s == 0.0 ? 0.0 : 2.0 * s * value_at(U, tri, b);
    });
}

SparseMatrix assemble_MED(const Mesh& mesh, MedDomain domain) {
    Triplets trip;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        if (domain == MedDomain::observation && mesh.region(t) != Region::observation) continue;
        const auto& tri = mesh.triangle(t);
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.observation_index(tri[a]);
            if (i < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int j = mesh.interior_index(tri[b]);
                if (j >= 0) trip.emplace_back(i, j, mesh.area(t) * (a == b ? 2.0 : 1.0) / 12.0);
            }
        }
    }
    return from_triplets(mesh.num_observation(), mesh.num_interior(), trip);
}

FemSystem::FemSystem(const Mesh& mesh, ProblemData data, SolverOptions solver)
    : mesh_(&mesh),
      data_(std::move(data)),
      pi_(build_pih(mesh)),
      solver_(assemble_stiffness(mesh), solver),
      F_(assemble_load(mesh, data_.f)),
      MED_(assemble_MED(mesh, data_.med_domain)) {
    if (!(data_.eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

FemSystem FemSystem::with_solver(SolverOptions solver) const {
    FemSystem copy = *this;
    copy.solver_ = SpdSolver(solver_.matrix(), solver);
    return copy;
}

Vector solve_state(const FemSystem& sys, const Vector& G, const Vector& U) {
    return solve_state(sys, assemble_B1(sys.mesh(), G, sys.eps()), U);
}

Vector solve_state(const FemSystem& sys, const SparseMatrix& B1, const Vector& U) {
    return sys.solver().solve(sys.F() + B1 * U);
}

Vector solve_variation(const FemSystem& sys, const SparseMatrix& B1, const SparseMatrix& C1,
                       const Vector& R, const Vector& V) {
    return sys.solver().solve(B1 * V + C1 * R);
}

Vector eval_L(const FemSystem& sys, const Vector& Y_full) {
    const Mesh& mesh = sys.mesh();
    Vector L(mesh.num_observation());
    for (int k = 0; k < mesh.num_observation(); ++k) {
        const int i = mesh.observation_nodes()[k];
        const Vec2& x = mesh.vertex(i);
        const double yd = sys.data().yd(x[0], x[1]);
        L[k] = sys.data().j2(ExprVars{x[0], x[1], Y_full[i], yd});
    }
    return L;
}

Vector solve_adjoint(const FemSystem& sys, const Vector& Y_full, const Vector& NY) {
    const Vector rhs = sys.MED().transpose() * eval_L(sys, Y_full) + (2.0 / sys.eps()) * NY;
    return sys.solver().solve(rhs);
}

}  // namespace topopt
