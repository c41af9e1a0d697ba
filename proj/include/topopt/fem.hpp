#pragma once

#include <functional>
#include <stdexcept>

#include "topopt/expr.hpp"
#include "topopt/mesh.hpp"

namespace topopt {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration domain of the observation mass matrix M_ED.
enum class MedDomain { hold_all, observation };

struct SolverOptions {
    double rel_tol = 1e-10;
    int max_iter_factor = 10;  ///< iteration cap = factor * system size
};

/// Jacobi-preconditioned conjugate gradients on a fixed SPD matrix.
/// Each call builds its own Krylov workspace, so concurrent solves are safe.
class SpdSolver {
public:
    explicit SpdSolver(SparseMatrix K, SolverOptions opts = {});
    Vector solve(const Vector& b) const;
    const SparseMatrix& matrix() const { return K_; }
    const SolverOptions& options() const { return opts_; }

private:
    SparseMatrix K_;
    SolverOptions opts_;
};

Vector solve_spd(const SparseMatrix& K, const Vector& b, const SolverOptions& opts = {});

// ---- assembly -------------------------------------------------------------

/// K_ij = ∫ ∇φ_j·∇φ_i over I0 x I0.
SparseMatrix assemble_stiffness(const Mesh& mesh);

/// Plain mass matrix, all nodes (n x n).
SparseMatrix assemble_mass(const Mesh& mesh);

/// F_i = ∫ f φ_i, i in I0, by the edge-midpoint rule.
Vector assemble_load(const Mesh& mesh, const Expr& f);

/// ∫ w φ_j φ_i with rows over I0 and columns over all nodes, using the
/// degree-4 rule. `weight(t, bary, x)` is evaluated at each quadrature node.
using PointWeight = std::function<double(int, const std::array<double, 3>&, const Vec2&)>;
SparseMatrix assemble_weighted_mass(const Mesh& mesh, const PointWeight& weight);

/// B¹ = ∫ (g_h+ε)_+² φ_j φ_i  (n0 x n)
SparseMatrix assemble_B1(const Mesh& mesh, const Vector& G, double eps);
/// C¹ = ∫ 2(g_h+ε)_+ u_h φ_j φ_i  (n0 x n)
SparseMatrix assemble_C1(const Mesh& mesh, const Vector& G, double eps, const Vector& U);

/// M_ED = ∫ φ_i φ_j, i in I_E, j in I0  (nE x n0).
SparseMatrix assemble_MED(const Mesh& mesh, MedDomain domain = MedDomain::hold_all);

// ---- problem context --------------------------------------------------------

/// Data of the penalized control problem, fixed over an optimization run.
struct ProblemData {
    Expr f;
    Expr yd;
    Expr j;   ///< integrand j(x, y) over E, may use y and yd
    Expr j2;  ///< ∂j/∂y
    double eps = 0.1;
    MedDomain med_domain = MedDomain::hold_all;
};

/// Mesh-dependent operators that never change during an optimization run.
class FemSystem {
public:
    FemSystem(const Mesh& mesh, ProblemData data, SolverOptions solver = {});

    const Mesh& mesh() const { return *mesh_; }
    const ProblemData& data() const { return data_; }
    const DiscreteDerivativeOps& pi() const { return pi_; }
    const SpdSolver& solver() const { return solver_; }
    const SparseMatrix& K() const { return solver_.matrix(); }
    const Vector& F() const { return F_; }
    const SparseMatrix& MED() const { return MED_; }
    double eps() const { return data_.eps; }

    /// Copy with a different solver tolerance (used by finite-difference checks).
    FemSystem with_solver(SolverOptions solver) const;

private:
    const Mesh* mesh_;
    ProblemData data_;
    DiscreteDerivativeOps pi_;
    SpdSolver solver_;
    Vector F_;
    SparseMatrix MED_;
};

/// K Y = F + B¹(G,ε) U
Vector solve_state(const FemSystem& sys, const Vector& G, const Vector& U);
Vector solve_state(const FemSystem& sys, const SparseMatrix& B1, const Vector& U);

/// K Q = B¹ V + C¹ R
Vector solve_variation(const FemSystem& sys, const SparseMatrix& B1, const SparseMatrix& C1,
                       const Vector& R, const Vector& V);

/// L(Y)_i = ∂₂j(A_i, y_h(A_i)) for i in I_E.
Vector eval_L(const FemSystem& sys, const Vector& Y_full);

/// K P = M_EDᵀ L(Y) + (2/ε) N Y, where `NY` is the curve term already summed
/// over all orbit components (size n0).
Vector solve_adjoint(const FemSystem& sys, const Vector& Y_full, const Vector& NY);

}  // namespace topopt
