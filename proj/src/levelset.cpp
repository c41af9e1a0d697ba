#include "topopt/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace topopt {

namespace {

constexpr double kStagnation = 1e-12;

double interp(const Vector& nodal, const Mesh& mesh, const Location& loc) {
    return interpolate(mesh, nodal, loc);
}

Location locate_or_escape(const Mesh& mesh, const Vec2& p, int hint) {
    try {
        return mesh.locate(p, hint);
    } catch (const OutsideDomainError&) {
        throw TraceError(TraceFailure::escaped,
                         fmt::format("orbit escaped the domain at ({:.6g}, {:.6g})", p.x(), p.y()));
    }
}

Vec2 checked_velocity(const HamiltonianField& field, const Location& loc, const Vec2& p) {
    const Vec2 v = field.velocity(loc);
    if (!(v.norm() >= kStagnation))
        throw TraceError(TraceFailure::stagnation,
                         fmt::format("Hamiltonian velocity vanishes at ({:.6g}, {:.6g})", p.x(), p.y()));
    return v;
}

/// Σ_a bary_a * row(tri[a]) of a row-major matrix, as a sparse vector.
Eigen::SparseVector<double> combine_rows(const SparseMatrix& A, const Mesh& mesh, const Location& loc,
                                         double scale) {
    std::vector<std::pair<int, double>> entries;
    const auto& tri = mesh.triangle(loc.triangle);
    for (int a = 0; a < 3; ++a) {
        if (loc.bary[a] == 0.0) continue;
        for (SparseMatrix::InnerIterator it(A, tri[a]); it; ++it)
            entries.emplace_back(static_cast<int>(it.col()), scale * loc.bary[a] * it.value());
    }
    std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    Eigen::SparseVector<double> v(A.cols());
    v.reserve(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size();) {
        double sum = 0.0;
        std::size_t j = i;
        for (; j < entries.size() && entries[j].first == entries[i].first; ++j) sum += entries[j].second;
        v.insertBack(entries[i].first) = sum;
        i = j;
    }
    return v;
}

double sparse_dot(const Eigen::SparseVector<double>& s, const Vector& x) {
    double acc = 0.0;
    for (Eigen::SparseVector<double>::InnerIterator it(s); it; ++it) acc += it.value() * x[it.index()];
    return acc;
}

void sparse_axpy(double a, const Eigen::SparseVector<double>& s, Vector& y) {
    if (a == 0.0) return;
    for (Eigen::SparseVector<double>::InnerIterator it(s); it; ++it) y[it.index()] += a * it.value();
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    double s = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return (a + s * d - p).norm();
}

}  // namespace

Eigen::Matrix2d velocity_jacobian(const Eigen::Matrix2d& H) {
    Eigen::Matrix2d A;
    A << -H(0, 1), -H(1, 1), H(0, 0), H(1, 0);
    return A;
}

// ---- field ------------------------------------------------------------------

HamiltonianField::HamiltonianField(const Mesh& mesh, const DiscreteDerivativeOps& pi, const Vector& G)
    : HamiltonianField(mesh, pi, G, pi.pi1 * G, pi.pi2 * G) {}

HamiltonianField::HamiltonianField(const Mesh& mesh, const DiscreteDerivativeOps& pi, Vector G, Vector d1,
                                   Vector d2)
    : mesh_(&mesh), pi_(&pi), G_(std::move(G)), d1_(std::move(d1)), d2_(std::move(d2)) {
    d11_ = pi.pi1 * d1_;
    d12_ = pi.pi1 * d2_;
    d21_ = pi.pi2 * d1_;
    d22_ = pi.pi2 * d2_;
}

HamiltonianField HamiltonianField::from_gradients(const Mesh& mesh, const DiscreteDerivativeOps& pi,
                                                  const Vector& G, Vector d1, Vector d2) {
    return HamiltonianField(mesh, pi, G, std::move(d1), std::move(d2));
}

Vec2 HamiltonianField::velocity(const Location& loc) const {
    return Vec2(-interp(d2_, *mesh_, loc), interp(d1_, *mesh_, loc));
}

Eigen::Matrix2d HamiltonianField::hessian(const Location& loc, Linearization mode) const {
    Eigen::Matrix2d H;
    if (mode == Linearization::recovered) {
        H << interp(d11_, *mesh_, loc), interp(d12_, *mesh_, loc), interp(d21_, *mesh_, loc),
            interp(d22_, *mesh_, loc);
    } else {
        const Vec2 g1 = element_gradient(*mesh_, d1_, loc.triangle);
        const Vec2 g2 = element_gradient(*mesh_, d2_, loc.triangle);
        H << g1.x(), g2.x(), g1.y(), g2.y();
    }
    return H;
}

// ---- tracing ------------------------------------------------------------------

Trajectory trace_orbit(const HamiltonianField& field, const Vec2& seed, const TraceOptions& opts) {
    if (!(opts.dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const Mesh& mesh = field.mesh();
    Trajectory tr;
    tr.dt = opts.dt;
    tr.seed = seed;
    const Location l0 = locate_or_escape(mesh, seed, 0);
    const Vec2 v0 = checked_velocity(field, l0, seed);
    const double radius = opts.closure_factor * opts.dt * v0.norm();
    tr.Z.push_back(seed);
    tr.loc.push_back(l0);

    double prev_s = 0.0;
    for (int k = 0; k < opts.max_steps; ++k) {
        const Vec2 next = tr.Z[k] + opts.dt * checked_velocity(field, tr.loc[k], tr.Z[k]);
        tr.Z.push_back(next);
        tr.loc.push_back(locate_or_escape(mesh, next, tr.loc[k].triangle));

        const double s = (next - seed).dot(v0);
        if (k + 1 >= opts.min_steps && prev_s < 0.0 && s >= 0.0 && (next - seed).norm() < radius) {
            // The seed lies between the last two points; the closer one becomes Z_m.
            const double before = (tr.Z[k] - seed).norm();
            if (before < (next - seed).norm() && k >= opts.min_steps) {
                tr.Z.pop_back();
                tr.loc.pop_back();
            }
            tr.Z.back() = seed;
            tr.loc.back() = l0;
            return tr;
        }
        prev_s = s;
    }
    throw TraceError(TraceFailure::no_closure,
                     fmt::format("orbit from ({:.6g}, {:.6g}) did not close within {} steps", seed.x(),
                                 seed.y(), opts.max_steps));
}

Trajectory trace_fixed(const HamiltonianField& field, const Vec2& seed, double dt, int m) {
    if (m < 1) throw std::invalid_argument("an orbit needs at least one interval");
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const Mesh& mesh = field.mesh();
    Trajectory tr;
    tr.dt = dt;
    tr.seed = seed;
    tr.Z.reserve(m + 1);
    tr.Z.push_back(seed);
    tr.loc.push_back(locate_or_escape(mesh, seed, 0));
    for (int k = 0; k + 1 < m; ++k) {
        const Vec2 next = tr.Z[k] + dt * checked_velocity(field, tr.loc[k], tr.Z[k]);
        tr.Z.push_back(next);
        tr.loc.push_back(locate_or_escape(mesh, next, tr.loc[k].triangle));
    }
    tr.Z.push_back(seed);
    tr.loc.push_back(tr.loc.front());
    return tr;
}

std::vector<Vec2> edge_crossings(const Mesh& mesh, const Vector& G) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(3 * static_cast<std::size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        for (int a = 0; a < 3; ++a) {
            const int u = tri[a], v = tri[(a + 1) % 3];
            if ((G[u] < 0.0) != (G[v] < 0.0)) edges.emplace_back(std::min(u, v), std::max(u, v));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    std::vector<Vec2> out;
    out.reserve(edges.size());
    for (auto [u, v] : edges) {
        const double s = G[u] / (G[u] - G[v]);
        out.push_back(mesh.vertex(u) + s * (mesh.vertex(v) - mesh.vertex(u)));
    }
    return out;
}

std::vector<Trajectory> trace_components(const HamiltonianField& field, const TraceOptions& opts) {
    const Mesh& mesh = field.mesh();
    const std::vector<Vec2> crossings = edge_crossings(mesh, field.G());
    if (crossings.empty()) throw TraceError(TraceFailure::empty_zero_set, "the zero level set of g_h is empty");

    const double radius = opts.claim_factor * mesh.h();
    std::vector<char> claimed(crossings.size(), 0);
    std::vector<Trajectory> orbits;
    for (std::size_t i = 0; i < crossings.size(); ++i) {
        if (claimed[i]) continue;
        // Crossings are claimed against the fine pilot orbit even when a coarse
        // fixed-m retrace is returned: the coarse polygon cuts corners.
        const Trajectory tr = trace_orbit(field, crossings[i], opts);
        claimed[i] = 1;

        // Bounding box of the polyline, inflated by the claim radius, as a cheap prefilter.
        Vec2 lo = tr.Z[0], hi = tr.Z[0];
        for (const Vec2& z : tr.Z) {
            lo = lo.cwiseMin(z);
            hi = hi.cwiseMax(z);
        }
        lo.array() -= radius;
        hi.array() += radius;
        for (std::size_t c = i + 1; c < crossings.size(); ++c) {
            if (claimed[c]) continue;
            const Vec2& p = crossings[c];
            if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
            for (int k = 0; k < tr.m(); ++k) {
                if (distance_to_segment(p, tr.Z[k], tr.Z[k + 1]) < radius) {
                    claimed[c] = 1;
                    break;
                }
            }
        }
        orbits.push_back(opts.fixed_m > 0 ? trace_fixed(field, crossings[i], tr.period() / opts.fixed_m, opts.fixed_m)
                                          : tr);
        orbits.back().component = static_cast<int>(orbits.size()) - 1;
    }
    return orbits;
}

std::vector<Vec2> find_seeds(const HamiltonianField& field, const TraceOptions& opts) {
    std::vector<Vec2> seeds;
    for (const auto& tr : trace_components(field, opts)) seeds.push_back(tr.seed);
    return seeds;
}

std::vector<OrbitPin> pins_of(const std::vector<Trajectory>& orbits) {
    std::vector<OrbitPin> pins;
    for (const auto& tr : orbits) pins.push_back({tr.seed, tr.dt, tr.m()});
    return pins;
}

std::vector<Trajectory> trace_pinned(const HamiltonianField& field, const std::vector<OrbitPin>& pins) {
    std::vector<Trajectory> out;
    for (const auto& pin : pins) {
        out.push_back(trace_fixed(field, pin.seed, pin.dt, pin.m));
        out.back().component = static_cast<int>(out.size()) - 1;
    }
    return out;
}

AdmissibilityReport validate_admissible(const Mesh& mesh, const Vector& G, double grad_threshold) {
    AdmissibilityReport rep;
    rep.min_boundary = std::numeric_limits<double>::infinity();
    rep.max_observation = -std::numeric_limits<double>::infinity();
    rep.min_gradient = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mesh.num_vertices(); ++i)
        if (mesh.on_boundary(i)) rep.min_boundary = std::min(rep.min_boundary, G[i]);
    for (int i : mesh.observation_nodes()) rep.max_observation = std::max(rep.max_observation, G[i]);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        const bool neg = G[tri[0]] < 0.0;
        if ((G[tri[1]] < 0.0) == neg && (G[tri[2]] < 0.0) == neg) continue;
        rep.min_gradient = std::min(rep.min_gradient, element_gradient(mesh, G, t).norm());
    }
    rep.boundary_positive = rep.min_boundary > 0.0;
    rep.observation_negative = rep.max_observation < 0.0;
    rep.gradient_nonzero = rep.min_gradient > grad_threshold;
    return rep;
}

// ---- linearization ------------------------------------------------------------

std::vector<Vec2> variation_path(const HamiltonianField& field, const Trajectory& Z, const Vector& R,
                                 Linearization mode) {
    const Mesh& mesh = field.mesh();
    const Vector r1 = field.pi().pi1 * R;
    const Vector r2 = field.pi().pi2 * R;
    const int m = Z.m();
    std::vector<Vec2> W(m + 1, Vec2::Zero());
    for (int k = 0; k < m; ++k) {
        if (mode == Linearization::consistent && k == m - 1) break;  // W_m = 0: Z_m is pinned
        const Eigen::Matrix2d A = velocity_jacobian(field.hessian(Z.loc[k], mode));
        const Vec2 forcing(-interp(r2, mesh, Z.loc[k]), interp(r1, mesh, Z.loc[k]));
        W[k + 1] = W[k] + Z.dt * (A * W[k] + forcing);
    }
    return W;
}

OrbitOperators build_orbit_operators(const HamiltonianField& field, const Trajectory& Z, Linearization mode) {
    const Mesh& mesh = field.mesh();
    const int m = Z.m();
    OrbitOperators ops;
    ops.dt = Z.dt;
    ops.M.reserve(m);
    for (int k = 0; k < m; ++k) {
        if (mode == Linearization::consistent && k == m - 1) {
            ops.M.push_back(Eigen::Matrix2d::Zero());
            ops.N1.emplace_back(mesh.num_vertices());
            ops.N2.emplace_back(mesh.num_vertices());
            continue;
        }
        ops.M.push_back(Eigen::Matrix2d::Identity() + Z.dt * velocity_jacobian(field.hessian(Z.loc[k], mode)));
        ops.N1.push_back(combine_rows(field.pi().pi2, mesh, Z.loc[k], -Z.dt));
        ops.N2.push_back(combine_rows(field.pi().pi1, mesh, Z.loc[k], Z.dt));
    }
    return ops;
}

std::vector<Vec2> OrbitOperators::apply(const Vector& R) const {
    std::vector<Vec2> W(m() + 1, Vec2::Zero());
    for (int k = 0; k < m(); ++k) W[k + 1] = M[k] * W[k] + Vec2(sparse_dot(N1[k], R), sparse_dot(N2[k], R));
    return W;
}

Vector OrbitOperators::apply_transpose(const std::vector<Vec2>& a) const {
    const Eigen::Index n = N1.empty() ? 0 : N1.front().size();
    Vector grad = Vector::Zero(n);
    if (m() == 0) return grad;
    Vec2 mu = a[m()];
    for (int k = m() - 1; k >= 0; --k) {
        // mu = μ_{k+1}: sensitivity of the functional to W_{k+1}
        sparse_axpy(mu.x(), N1[k], grad);
        sparse_axpy(mu.y(), N2[k], grad);
        if (k > 0) mu = a[k] + M[k].transpose() * mu;
    }
    return grad;
}

void OrbitOperators::dense_blocks(Eigen::MatrixXd& B2, Eigen::MatrixXd& B3) const {
    const int mm = m();
    const Eigen::Index n = N1.empty() ? 0 : N1.front().size();
    // Block lower-triangular propagator: block (k, j) = M(k) M(k-1) ... M(j+1), identity for k = j.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2 * mm, 2 * mm);
    for (int j = 0; j < mm; ++j) {
        Eigen::Matrix2d block = Eigen::Matrix2d::Identity();
        P.block<2, 2>(2 * j, 2 * j) = block;
        for (int k = j + 1; k < mm; ++k) {
            block = M[k] * block;
            P.block<2, 2>(2 * k, 2 * j) = block;
        }
    }
    Eigen::MatrixXd Nstack = Eigen::MatrixXd::Zero(2 * mm, n);
    for (int k = 0; k < mm; ++k) {
        Nstack.row(2 * k) = Eigen::RowVectorXd(N1[k].transpose());
        Nstack.row(2 * k + 1) = Eigen::RowVectorXd(N2[k].transpose());
    }
    const Eigen::MatrixXd W = P * Nstack;  // rows: W_1^1, W_1^2, ..., W_m^2
    B2.resize(mm, n);
    B3.resize(mm, n);
    for (int k = 0; k < mm; ++k) {
        B2.row(k) = W.row(2 * k);
        B3.row(k) = W.row(2 * k + 1);
    }
}

Eigen::MatrixXd OrbitOperators::dense_B2() const {
    Eigen::MatrixXd B2, B3;
    dense_blocks(B2, B3);
    return B2;
}

Eigen::MatrixXd OrbitOperators::dense_B3() const {
    Eigen::MatrixXd B2, B3;
    dense_blocks(B2, B3);
    return B3;
}

}  // namespace topopt
