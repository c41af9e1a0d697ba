#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "topopt/fem.hpp"
#include "topopt/levelset.hpp"

namespace topopt {

/// Gauss sample on one orbit interval [Z_k, Z_{k+1}].
struct CurvePoint {
    Location loc;
    double weight;  ///< Gauss weight times |Z_{k+1} - Z_k|, so Σ weight·f ≈ ∫ f(Z)|Z'| dt
    double s;       ///< position in the interval; left hat is 1-s, right hat s
    int interval;
};

/// Three Gauss points per orbit interval.
struct CurveQuadrature {
    std::vector<CurvePoint> points;
    int m = 0;
};

CurveQuadrature build_curve_quadrature(const Mesh& mesh, const Trajectory& Z);

/// N(Z)_ij = ∫ φ_i(Z) φ_j(Z) |Z'| dt over I0 x I0.
SparseMatrix assemble_N(const Mesh& mesh, const CurveQuadrature& cq);
/// (N Y)_i without forming N; Y_full has size n.
Vector apply_N(const Mesh& mesh, const CurveQuadrature& cq, const Vector& Y_full);
/// ∫ y_h(Z)² |Z'| dt = Yᵀ N Y.
double penalty_integral(const Mesh& mesh, const CurveQuadrature& cq, const Vector& Y_full);

/// T¹W¹ and T²W² (n0 x n): ∫ φ_i φ_j W^a(t) |Z'| dt with W linear on each interval.
std::pair<SparseMatrix, SparseMatrix> apply_T1_T2(const Mesh& mesh, const CurveQuadrature& cq,
                                                  const std::vector<Vec2>& W);
/// T³W (n0 x n0): Σ_k (ΔZ_k·ΔW_k / |ΔZ_k|²) ∫_k φ_i φ_j |Z'| dt.
SparseMatrix apply_T3(const Mesh& mesh, const CurveQuadrature& cq, const Trajectory& Z,
                      const std::vector<Vec2>& W);

struct CostBreakdown {
    double J1 = 0.0;
    std::vector<double> penalty;  ///< ∫ y_h² |Z'| per component
    double eps = 0.0;
    double total = 0.0;

    double penalty_sum() const;
};

/// ∫_E j(x, y_h(x)) dx by the degree-4 rule on E-labeled triangles
/// (restricted to those accepted by `include`, when given).
double eval_J1(const FemSystem& sys, const Vector& Y_full, const std::function<bool(int)>& include = {});

/// J = J1 + (1/ε) Σ_c ∫ y_h² |Z_c'| dt
CostBreakdown eval_cost(const FemSystem& sys, const Vector& Y_full, const std::vector<CurveQuadrature>& curves);

}  // namespace topopt
