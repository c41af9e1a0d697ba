#include "topopt/grad.hpp"

#include <stdexcept>

#include "topopt/quadrature.hpp"

namespace topopt {

namespace {

/// Gradient of y_h at a located point under the chosen linearization.
class StateGradient {
public:
    StateGradient(const FemSystem& sys, const Vector& Y_full, Linearization mode)
        : mesh_(sys.mesh()), Y_(Y_full), mode_(mode) {
        if (mode == Linearization::recovered) {
            gy1_ = sys.pi().pi1 * Y_full;
            gy2_ = sys.pi().pi2 * Y_full;
        }
    }

    Vec2 operator()(const Location& loc) const {
        if (mode_ == Linearization::consistent) return element_gradient(mesh_, Y_, loc.triangle);
        return Vec2(interpolate(mesh_, gy1_, loc), interpolate(mesh_, gy2_, loc));
    }

private:
    const Mesh& mesh_;
    const Vector& Y_;
    Linearization mode_;
    Vector gy1_, gy2_;
};

void scatter(const Mesh& mesh, const Location& loc, double value, Vector& out) {
    const auto& tri = mesh.triangle(loc.triangle);
    for (int a = 0; a < 3; ++a) out[tri[a]] += value * loc.bary[a];
}

}  // namespace

Evaluation evaluate(const FemSystem& sys, const Vector& G, const Vector& U, const TraceOptions& trace,
                    const std::vector<OrbitPin>* pins) {
    const Mesh& mesh = sys.mesh();
    Evaluation ev;
    ev.G = G;
    ev.U = U;
    ev.B1 = assemble_B1(mesh, G, sys.eps());
    ev.Y_full = extend_interior(mesh, solve_state(sys, ev.B1, U));
    ev.field.emplace(mesh, sys.pi(), G);
    ev.orbits = pins ? trace_pinned(*ev.field, *pins) : trace_components(*ev.field, trace);
    for (const auto& tr : ev.orbits) ev.curves.push_back(build_curve_quadrature(mesh, tr));
    ev.cost = eval_cost(sys, ev.Y_full, ev.curves);
    return ev;
}

Vector curve_load(const FemSystem& sys, const Evaluation& ev) {
    Vector NY = Vector::Zero(sys.mesh().num_interior());
    for (const auto& cq : ev.curves) NY += apply_N(sys.mesh(), cq, ev.Y_full);
    return NY;
}

Vector compute_adjoint(const FemSystem& sys, const Evaluation& ev) {
    return solve_adjoint(sys, ev.Y_full, curve_load(sys, ev));
}

GradientTerms dJ_assembled(const FemSystem& sys, const Evaluation& ev, const Vector& R, const Vector& V,
                           Linearization mode) {
    const Mesh& mesh = sys.mesh();
    const double eps = sys.eps();
    const SparseMatrix C1 = assemble_C1(mesh, ev.G, eps, ev.U);
    const Vector Q = solve_variation(sys, ev.B1, C1, R, V);
    const Vector Q_full = extend_interior(mesh, Q);

    GradientTerms d;
    d.state = eval_L(sys, ev.Y_full).dot(sys.MED() * Q);

    const StateGradient grad_y(sys, ev.Y_full, mode);
    for (std::size_t c = 0; c < ev.orbits.size(); ++c) {
        const Trajectory& Z = ev.orbits[c];
        const std::vector<Vec2> W = variation_path(*ev.field, Z, R, mode);
        for (const auto& p : ev.curves[c].points) {
            const int k = p.interval;
            const double y = interpolate(mesh, ev.Y_full, p.loc);
            const double q = interpolate(mesh, Q_full, p.loc);
            const Vec2 w = (1.0 - p.s) * W[k] + p.s * W[k + 1];
            const Vec2 dz = Z.Z[k + 1] - Z.Z[k];
            const double stretch = dz.dot(W[k + 1] - W[k]) / dz.squaredNorm();
            d.state += (2.0 / eps) * p.weight * y * q;
            d.transport += (2.0 / eps) * p.weight * y * grad_y(p.loc).dot(w);
            d.stretch += (1.0 / eps) * p.weight * stretch * y * y;
        }
    }
    return d;
}

LambdaVectors build_lambda(const FemSystem& sys, const Evaluation& ev, int component, Linearization mode) {
    const Mesh& mesh = sys.mesh();
    const Trajectory& Z = ev.orbits.at(component);
    const int m = Z.m();
    const double dt = Z.dt;
    const StateGradient grad_y(sys, ev.Y_full, mode);

    LambdaVectors lam;
    lam.lam1.assign(m + 1, Vec2::Zero());
    lam.lam3.assign(m + 1, Vec2::Zero());
    lam.lam2_1 = Vector::Zero(mesh.num_vertices());
    lam.lam2_2 = Vector::Zero(mesh.num_vertices());

    auto velocity = [&](int k) -> Vec2 {
        const int kk = (k == m) ? 0 : k;  // Z' is periodic
        return (Z.Z[kk + 1] - Z.Z[kk]) / dt;
    };
    for (int k = 0; k <= m; ++k) {
        const Location& loc = Z.loc[k];
        const Vec2 zp = velocity(k);
        const double speed = zp.norm();
        const double y = interpolate(mesh, ev.Y_full, loc);

        // Trapezoid weights; W_0 = 0 so the k = 0 node only matters for Λ̃₂.
        const double w_end = (k == 0 || k == m) ? 0.5 * dt : dt;
        const Vec2 lam2 = (y * y / speed) * zp;
        scatter(mesh, loc, w_end * lam2.x(), lam.lam2_1);
        scatter(mesh, loc, w_end * lam2.y(), lam.lam2_2);
        if (k == 0) continue;

        lam.lam1[k] = 2.0 * w_end * y * speed * grad_y(loc);
        const Eigen::Matrix2d A = velocity_jacobian(ev.field->hessian(loc, mode));
        lam.lam3[k] = w_end * (y * y / speed) * (A.transpose() * zp);
    }
    return lam;
}

GradientTerms dJ_operator(const FemSystem& sys, const Evaluation& ev, const Vector& P, const Vector& R,
                          const Vector& V, Linearization mode) {
    const double eps = sys.eps();
    const SparseMatrix C1 = assemble_C1(sys.mesh(), ev.G, eps, ev.U);
    GradientTerms d;
    d.state = P.dot(ev.B1 * V + C1 * R);

    const Vector r1 = sys.pi().pi1 * R;
    const Vector r2 = sys.pi().pi2 * R;
    for (std::size_t c = 0; c < ev.orbits.size(); ++c) {
        const LambdaVectors lam = build_lambda(sys, ev, static_cast<int>(c), mode);
        const OrbitOperators ops = build_orbit_operators(*ev.field, ev.orbits[c], mode);
        const std::vector<Vec2> W = ops.apply(R);
        for (int k = 1; k <= ops.m(); ++k) {
            d.transport += lam.lam1[k].dot(W[k]) / eps;
            d.stretch += lam.lam3[k].dot(W[k]) / eps;
        }
        d.forcing += (-lam.lam2_1.dot(r2) + lam.lam2_2.dot(r1)) / eps;
    }
    return d;
}

std::vector<Vec2> assembled_orbit_weights(const FemSystem& sys, const Evaluation& ev, int component,
                                          Linearization mode) {
    const Mesh& mesh = sys.mesh();
    const double eps = sys.eps();
    const Trajectory& Z = ev.orbits.at(component);
    const StateGradient grad_y(sys, ev.Y_full, mode);
    std::vector<Vec2> a(Z.m() + 1, Vec2::Zero());
    for (const auto& p : ev.curves.at(component).points) {
        const int k = p.interval;
        const double y = interpolate(mesh, ev.Y_full, p.loc);
        const Vec2 t = (2.0 / eps) * p.weight * y * grad_y(p.loc);
        const Vec2 dz = Z.Z[k + 1] - Z.Z[k];
        const Vec2 st = (1.0 / eps) * p.weight * y * y * dz / dz.squaredNorm();
        a[k] += (1.0 - p.s) * t - st;
        a[k + 1] += p.s * t + st;
    }
    a[0] = Vec2::Zero();  // W_0 = 0
    return a;
}

Vector orbit_gradient(const FemSystem& sys, const Evaluation& ev, Linearization mode) {
    Vector g = Vector::Zero(sys.mesh().num_vertices());
    for (std::size_t c = 0; c < ev.orbits.size(); ++c) {
        const OrbitOperators ops = build_orbit_operators(*ev.field, ev.orbits[c], mode);
        if (mode == Linearization::consistent) {
            g += ops.apply_transpose(assembled_orbit_weights(sys, ev, static_cast<int>(c), mode));
            continue;
        }
        const LambdaVectors lam = build_lambda(sys, ev, static_cast<int>(c), mode);
        std::vector<Vec2> a(lam.lam1.size());
        for (std::size_t k = 0; k < a.size(); ++k) a[k] = lam.lam1[k] + lam.lam3[k];
        g += (ops.apply_transpose(a) + sys.pi().pi1.transpose() * lam.lam2_2 -
              sys.pi().pi2.transpose() * lam.lam2_1) /
             sys.eps();
    }
    return g;
}

std::string to_string(DirectionKind kind) {
    switch (kind) {
        case DirectionKind::adjoint41: return "adjoint41";
        case DirectionKind::rstar: return "rstar";
        case DirectionKind::full42: return "full42";
    }
    return "?";
}

DirectionKind parse_direction(const std::string& name) {
    if (name == "adjoint41") return DirectionKind::adjoint41;
    if (name == "rstar") return DirectionKind::rstar;
    if (name == "full42") return DirectionKind::full42;
    throw std::invalid_argument("unknown direction '" + name + "' (expected adjoint41, rstar or full42)");
}

DescentDirection direction_adjoint41(const FemSystem& sys, const Evaluation& ev, const Vector& P) {
    const Mesh& mesh = sys.mesh();
    const Vector P_full = extend_interior(mesh, P);
    DescentDirection d;
    d.kind = DirectionKind::adjoint41;
    d.V = -P_full;
    d.R = -P_full.cwiseProduct(ev.U);

    // Slope of the state terms with r = -p u taken pointwise (not its interpolant).
    double slope = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        double local = 0.0;
        for (const auto& q : quadrature::degree4) {
            auto at = [&](const Vector& x) {
                return q.bary[0] * x[tri[0]] + q.bary[1] * x[tri[1]] + q.bary[2] * x[tri[2]];
            };
            const double s = std::max(0.0, at(ev.G) + sys.eps());
            if (s == 0.0) continue;
            const double p = at(P_full), u = at(ev.U);
            local += q.weight * (s * s * p * p + 2.0 * s * u * u * p * p);
        }
        slope -= local * mesh.area(t);
    }
    d.predicted_slope = slope;
    return d;
}

DescentDirection direction_rstar(const FemSystem& sys, const Evaluation& ev, const Vector& P) {
    const SparseMatrix C1 = assemble_C1(sys.mesh(), ev.G, sys.eps(), ev.U);
    DescentDirection d;
    d.kind = DirectionKind::rstar;
    d.V = -(ev.B1.transpose() * P);
    d.R = -(C1.transpose() * P);
    d.predicted_slope = -d.V.squaredNorm() - d.R.squaredNorm();
    return d;
}

DescentDirection direction_full42(const FemSystem& sys, const Evaluation& ev, const Vector& P,
                                  Linearization mode) {
    DescentDirection d = direction_rstar(sys, ev, P);
    d.kind = DirectionKind::full42;
    d.R -= orbit_gradient(sys, ev, mode);
    d.predicted_slope = -d.V.squaredNorm() - d.R.squaredNorm();
    return d;
}

DescentDirection make_direction(DirectionKind kind, const FemSystem& sys, const Evaluation& ev, const Vector& P,
                                Linearization mode) {
    switch (kind) {
        case DirectionKind::adjoint41: return direction_adjoint41(sys, ev, P);
        case DirectionKind::rstar: return direction_rstar(sys, ev, P);
        case DirectionKind::full42: return direction_full42(sys, ev, P, mode);
    }
    throw std::invalid_argument("unknown direction");
}

}  // namespace topopt
