#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "topopt/mesh.hpp"

namespace topopt {

enum class TraceFailure { escaped, stagnation, no_closure, empty_zero_set };

class TraceError : public std::runtime_error {
public:
    TraceError(TraceFailure kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
    TraceFailure kind;
};

/// How the derivative of the Euler map with respect to the orbit point and the
/// closure step are linearized.
///  - recovered: second derivatives ∂_a∂_b g by composing Π twice, W_m from the
///    recursion (open end).
///  - consistent: exact derivative of the discrete orbit: element gradients of
///    the P1 fields Π^b G, and W_m = 0 because Z_m is pinned to Z_0.
enum class Linearization { recovered, consistent };

/// Velocity field (−∂₂^h g, ∂₁^h g) of the Hamiltonian flow of a nodal G.
class HamiltonianField {
public:
    HamiltonianField(const Mesh& mesh, const DiscreteDerivativeOps& pi, const Vector& G);
    /// Field built from prescribed nodal gradients (d1 ≈ ∂₁g, d2 ≈ ∂₂g).
    static HamiltonianField from_gradients(const Mesh& mesh, const DiscreteDerivativeOps& pi,
                                           const Vector& G, Vector d1, Vector d2);

    const Mesh& mesh() const { return *mesh_; }
    const DiscreteDerivativeOps& pi() const { return *pi_; }
    const Vector& G() const { return G_; }
    const Vector& d1() const { return d1_; }
    const Vector& d2() const { return d2_; }

    Vec2 velocity(const Location& loc) const;
    /// H(a,b) ≈ ∂_a ∂_b g at the point; see Linearization.
    Eigen::Matrix2d hessian(const Location& loc, Linearization mode) const;

private:
    HamiltonianField(const Mesh& mesh, const DiscreteDerivativeOps& pi, Vector G, Vector d1, Vector d2);

    const Mesh* mesh_;
    const DiscreteDerivativeOps* pi_;
    Vector G_, d1_, d2_;
    Vector d11_, d12_, d21_, d22_;  // d_ab = Π^a Π^b G
};

/// Derivative of the velocity (−∂₂g, ∂₁g) with respect to the point, given H(a,b) = ∂_a∂_b g.
Eigen::Matrix2d velocity_jacobian(const Eigen::Matrix2d& H);

/// Closed polygonal orbit Z_0..Z_m with Z_m = Z_0 and uniform step dt.
struct Trajectory {
    std::vector<Vec2> Z;
    std::vector<Location> loc;
    double dt = 0.0;
    int component = 0;
    Vec2 seed = Vec2::Zero();

    int m() const { return static_cast<int>(Z.size()) - 1; }
    double period() const { return m() * dt; }
};

struct TraceOptions {
    double dt = 0.01;
    int max_steps = 200000;
    int min_steps = 10;
    /// Closure is accepted within closure_factor * dt * |v(Z_0)| of the seed.
    double closure_factor = 20.0;
    /// Crossings within claim_factor * h of a traced orbit belong to it.
    double claim_factor = 1.0;
    /// When > 0, every orbit is retraced with exactly this many intervals.
    int fixed_m = 0;
};

/// Forward Euler until the orbit returns past its seed, then Z_m := Z_0.
Trajectory trace_orbit(const HamiltonianField& field, const Vec2& seed, const TraceOptions& opts);

/// Exactly m intervals: m-1 Euler steps followed by the imposed closure.
Trajectory trace_fixed(const HamiltonianField& field, const Vec2& seed, double dt, int m);

/// Zero crossings of g_h on mesh edges, in increasing (min vertex, max vertex) order.
std::vector<Vec2> edge_crossings(const Mesh& mesh, const Vector& G);

/// One orbit per connected component of the zero level set.
std::vector<Trajectory> trace_components(const HamiltonianField& field, const TraceOptions& opts);

std::vector<Vec2> find_seeds(const HamiltonianField& field, const TraceOptions& opts);

/// Pinned orbit description, used to hold (seed, dt, m) fixed across perturbations.
struct OrbitPin {
    Vec2 seed;
    double dt;
    int m;
};
std::vector<OrbitPin> pins_of(const std::vector<Trajectory>& orbits);
std::vector<Trajectory> trace_pinned(const HamiltonianField& field, const std::vector<OrbitPin>& pins);

struct AdmissibilityReport {
    bool boundary_positive = false;     // g_h > 0 on ∂D
    bool gradient_nonzero = false;      // |∇g_h| > threshold on cut triangles
    bool observation_negative = false;  // g_h < 0 on Ē
    double min_boundary = 0.0;
    double max_observation = 0.0;
    double min_gradient = 0.0;
    bool ok() const { return boundary_positive && gradient_nonzero && observation_negative; }
};
AdmissibilityReport validate_admissible(const Mesh& mesh, const Vector& G, double grad_threshold = 1e-8);

/// W_0..W_m of the linearized orbit for the direction R (explicit recursion).
std::vector<Vec2> variation_path(const HamiltonianField& field, const Trajectory& Z, const Vector& R,
                                 Linearization mode = Linearization::recovered);

/// Per-step linearization W_{k+1} = M₂(k) W_k + N₂(k) R.
struct OrbitOperators {
    double dt = 0.0;
    std::vector<Eigen::Matrix2d> M;                  // k = 0..m-1
    std::vector<Eigen::SparseVector<double>> N1, N2;  // rows of N₂(k), length n

    int m() const { return static_cast<int>(M.size()); }
    /// W_0..W_m for a direction R.
    std::vector<Vec2> apply(const Vector& R) const;
    /// Gradient with respect to R of Σ_{k=1..m} a_k · W_k (a has m+1 entries; a_0 unused).
    Vector apply_transpose(const std::vector<Vec2>& a) const;
    /// Dense m x n matrices (rows k = 1..m) from the block product form.
    Eigen::MatrixXd dense_B2() const;
    Eigen::MatrixXd dense_B3() const;

private:
    void dense_blocks(Eigen::MatrixXd& B2, Eigen::MatrixXd& B3) const;
};

OrbitOperators build_orbit_operators(const HamiltonianField& field, const Trajectory& Z,
                                     Linearization mode = Linearization::recovered);

}  // namespace topopt
