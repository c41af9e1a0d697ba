#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topopt/cost.hpp"
#include "topopt/fem.hpp"
#include "topopt/levelset.hpp"

namespace topopt {

/// Everything computed from a control pair (G, U): state, orbits, cost.
struct Evaluation {
    Vector G, U;
    Vector Y_full;  ///< state on all nodes (zero on ∂D)
    std::optional<HamiltonianField> field;
    std::vector<Trajectory> orbits;
    std::vector<CurveQuadrature> curves;
    SparseMatrix B1;
    CostBreakdown cost;
};

/// Solves the state, traces every component (or the pinned orbits), evaluates J.
Evaluation evaluate(const FemSystem& sys, const Vector& G, const Vector& U, const TraceOptions& trace,
                    const std::vector<OrbitPin>* pins = nullptr);

/// Curve term N(Z)Y summed over components (size n0).
Vector curve_load(const FemSystem& sys, const Evaluation& ev);

/// Adjoint state P (size n0).
Vector compute_adjoint(const FemSystem& sys, const Evaluation& ev);

/// Directional derivative of J split into its contributions.
struct GradientTerms {
    double state = 0.0;      ///< through the state variation Q (J1 and penalty)
    double transport = 0.0;  ///< from moving the orbit points (W)
    double forcing = 0.0;    ///< operator form only: direct ∂r part of the length variation
    double stretch = 0.0;    ///< from the change of |Z'| (operator form: the A W part)
    double total() const { return state + transport + forcing + stretch; }
};

/// Quadrature-level derivative: Q from the variation solve, W from the
/// variation path, T-type terms evaluated on the same Gauss samples as J.
GradientTerms dJ_assembled(const FemSystem& sys, const Evaluation& ev, const Vector& R, const Vector& V,
                           Linearization mode);

/// Trapezoidal weights along one orbit for the operator form.
struct LambdaVectors {
    std::vector<Vec2> lam1;  ///< Λ̃₁, k = 0..m (entry 0 unused)
    std::vector<Vec2> lam3;  ///< Λ̃₃, k = 0..m
    Vector lam2_1, lam2_2;   ///< Λ̃₂ components, size n
};
LambdaVectors build_lambda(const FemSystem& sys, const Evaluation& ev, int component, Linearization mode);

/// Adjoint/operator form: Pᵀ(B¹V + C¹R) plus Λ̃-weighted B², B³ and Π terms.
GradientTerms dJ_operator(const FemSystem& sys, const Evaluation& ev, const Vector& P, const Vector& R,
                          const Vector& V, Linearization mode);

/// Weights a_k on W_k such that the transport and stretch terms of
/// dJ_assembled equal Σ_k a_k·W_k (component c).
std::vector<Vec2> assembled_orbit_weights(const FemSystem& sys, const Evaluation& ev, int component,
                                          Linearization mode);

/// Gradient with respect to R of the orbit-dependent part of dJ (size n).
/// recovered: transpose of the operator form (Λ̃ weights through B², B³ and Π).
/// consistent: transpose of the assembled form, i.e. the exact discrete gradient
/// (the operator form's integration by parts does not hold across the pinned
/// closure step).
Vector orbit_gradient(const FemSystem& sys, const Evaluation& ev, Linearization mode);

enum class DirectionKind { adjoint41, rstar, full42 };
std::string to_string(DirectionKind kind);
DirectionKind parse_direction(const std::string& name);

struct DescentDirection {
    Vector R, V;  ///< size n
    DirectionKind kind = DirectionKind::adjoint41;
    /// Predicted slope of J along (R, V) by the formula matching the direction.
    double predicted_slope = 0.0;
};

/// r = -p u, v = -p (zero-extended); slope -∫(g+ε)_+² p² - ∫ 2(g+ε)_+ u² p² at quadrature points.
DescentDirection direction_adjoint41(const FemSystem& sys, const Evaluation& ev, const Vector& P);
/// V* = -B¹ᵀP, R* = -C¹ᵀP; slope -|V*|² - |R*|².
DescentDirection direction_rstar(const FemSystem& sys, const Evaluation& ev, const Vector& P);
/// V* and R** = R* - orbit gradient; slope -|V*|² - |R**|².
DescentDirection direction_full42(const FemSystem& sys, const Evaluation& ev, const Vector& P,
                                  Linearization mode);

DescentDirection make_direction(DirectionKind kind, const FemSystem& sys, const Evaluation& ev, const Vector& P,
                                Linearization mode);

}  // namespace topopt
