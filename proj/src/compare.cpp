#include "topopt/compare.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "topopt/cost.hpp"

namespace topopt {

Submesh extract_submesh(const Mesh& parent, const std::function<bool(int)>& keep, const std::string& what) {
    const int nt = parent.num_triangles();
    std::vector<char> in(nt, 0);
    std::vector<int> stack;
    for (int t = 0; t < nt; ++t) {
        if (parent.region(t) != Region::observation || !keep(t)) continue;
        in[t] = 1;
        stack.push_back(t);
    }
    if (stack.empty()) throw SubmeshError(fmt::format("{}: empty (no observation triangle qualifies)", what));

    // Flood fill through shared edges.
    while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        for (int k = 0; k < 3; ++k) {
            const int nb = parent.neighbor(t, k);
            if (nb >= 0 && !in[nb] && keep(nb)) {
                in[nb] = 1;
                stack.push_back(nb);
            }
        }
    }

    std::vector<int> local(parent.num_vertices(), -1);
    std::vector<int> parent_vertex, parent_triangle;
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> tris;
    std::vector<Region> labels;
    for (int t = 0; t < nt; ++t) {
        if (!in[t]) continue;
        std::array<int, 3> tri{};
        for (int k = 0; k < 3; ++k) {
            const int v = parent.triangle(t)[k];
            if (parent.on_boundary(v))
                throw SubmeshError(fmt::format("{}: empty (no closed level curve encloses E; the region reaches the outer boundary of the hold-all)", what));
            if (local[v] < 0) {
                local[v] = static_cast<int>(vertices.size());
                vertices.push_back(parent.vertex(v));
                parent_vertex.push_back(v);
            }
            tri[k] = local[v];
        }
        tris.push_back(tri);
        labels.push_back(parent.region(t));
        parent_triangle.push_back(t);
    }
    std::vector<bool> boundary = topological_boundary(static_cast<int>(vertices.size()), tris);
    double e_in = 0.0, e_all = 0.0;
    for (int t = 0; t < nt; ++t)
        if (parent.region(t) == Region::observation) {
            e_all += parent.area(t);
            if (in[t]) e_in += parent.area(t);
        }
    Submesh sub{Mesh(std::move(vertices), std::move(tris), std::move(labels), std::move(boundary)),
                std::move(parent_vertex), std::move(parent_triangle), e_in / e_all};
    if (sub.mesh.num_interior() == 0) throw SubmeshError(fmt::format("{}: no interior nodes", what));
    return sub;
}

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 e1 = b - a, e2 = c - a;
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

}  // namespace

Submesh clip_to_level(const Mesh& parent, const Vector& phi_in, const std::string& what) {
    const int nv = parent.num_vertices();
    const int nt = parent.num_triangles();
    Vector phi = phi_in;
    std::vector<Vec2> pos(nv);
    for (int i = 0; i < nv; ++i) pos[i] = parent.vertex(i);

    // A crossing within 10% of an edge from a vertex would leave a sliver:
    // move that vertex onto the crossing and mark it as lying on the level.
    constexpr double kNear = 0.1;
    for (int v = 0; v < nv; ++v) {
        if (phi[v] == 0 || parent.on_boundary(v)) continue;
        double best = kNear;
        Vec2 target;
        for (int t : parent.vertex_star(v))
            for (int w : parent.triangle(t)) {
                if (w == v || phi[w] == 0 || (phi[v] < 0) == (phi[w] < 0)) continue;
                const double s = phi[v] / (phi[v] - phi[w]);
                if (s < best) {
                    best = s;
                    target = pos[v] + s * (pos[w] - pos[v]);
                }
            }
        if (best < kNear) {
            pos[v] = target;
            phi[v] = 0;
        }
    }

    // Pieces of the parent triangles inside {phi < 0}, reachable from E.
    auto has_piece = [&](int t) {
        const auto& tri = parent.triangle(t);
        return phi[tri[0]] < 0 || phi[tri[1]] < 0 || phi[tri[2]] < 0;
    };
    auto shares_piece_edge = [&](int t, int k) {
        const auto& tri = parent.triangle(t);
        return phi[tri[(k + 1) % 3]] < 0 || phi[tri[(k + 2) % 3]] < 0;
    };
    std::vector<char> in(nt, 0);
    std::vector<int> stack;
    for (int t = 0; t < nt; ++t)
        if (parent.region(t) == Region::observation && has_piece(t)) {
            in[t] = 1;
            stack.push_back(t);
        }
    if (stack.empty()) throw SubmeshError(fmt::format("{}: empty (no part of the observation region is inside)", what));
    while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        for (int k = 0; k < 3; ++k) {
            const int nb = parent.neighbor(t, k);
            if (nb >= 0 && !in[nb] && shares_piece_edge(t, k)) {
                in[nb] = 1;
                stack.push_back(nb);
            }
        }
    }

    std::vector<int> local(nv, -1);
    std::map<std::pair<int, int>, int> crossing;
    std::vector<Vec2> vertices;
    std::vector<int> parent_vertex, parent_triangle;
    std::vector<std::array<int, 3>> tris;
    std::vector<Region> labels;
    auto vertex_id = [&](int v) {
        if (parent.on_boundary(v))
            throw SubmeshError(fmt::format("{}: empty (no closed level curve encloses E; the region reaches the outer boundary of the hold-all)", what));
        if (local[v] < 0) {
            local[v] = static_cast<int>(vertices.size());
            vertices.push_back(pos[v]);
            parent_vertex.push_back(v);
        }
        return local[v];
    };
    auto crossing_id = [&](int v, int w) {
        const auto key = std::minmax(v, w);
        auto [it, fresh] = crossing.try_emplace(key, static_cast<int>(vertices.size()));
        if (fresh) {
            const double s = phi[v] / (phi[v] - phi[w]);
            vertices.push_back(pos[v] + s * (pos[w] - pos[v]));
            parent_vertex.push_back(-1);
        }
        return it->second;
    };
    auto emit = [&](int t, int a, int b, int c) {
        if (signed_area(vertices[a], vertices[b], vertices[c]) < 0) std::swap(b, c);
        tris.push_back({a, b, c});
        labels.push_back(parent.region(t));
        parent_triangle.push_back(t);
    };

    for (int t = 0; t < nt; ++t) {
        if (!in[t]) continue;
        // Walk the triangle's boundary, keeping the part with phi <= 0.
        const auto& tri = parent.triangle(t);
        std::vector<int> poly;
        for (int k = 0; k < 3; ++k) {
            const int v = tri[k], w = tri[(k + 1) % 3];
            if (phi[v] <= 0) poly.push_back(vertex_id(v));
            if ((phi[v] < 0 && phi[w] > 0) || (phi[v] > 0 && phi[w] < 0)) poly.push_back(crossing_id(v, w));
        }
        if (poly.size() == 3) {
            emit(t, poly[0], poly[1], poly[2]);
        } else if (poly.size() == 4) {
            // Split the quadrilateral along the diagonal giving the larger smallest area.
            const auto& q = poly;
            auto A = [&](int a, int b, int c) { return std::abs(signed_area(vertices[a], vertices[b], vertices[c])); };
            if (std::min(A(q[0], q[1], q[2]), A(q[0], q[2], q[3])) >= std::min(A(q[1], q[2], q[3]), A(q[1], q[3], q[0]))) {
                emit(t, q[0], q[1], q[2]);
                emit(t, q[0], q[2], q[3]);
            } else {
                emit(t, q[1], q[2], q[3]);
                emit(t, q[1], q[3], q[0]);
            }
        }
    }

    std::vector<bool> boundary = topological_boundary(static_cast<int>(vertices.size()), tris);
    std::vector<double> piece_area(nt, 0.0);
    for (std::size_t k = 0; k < tris.size(); ++k)
        piece_area[parent_triangle[k]] +=
            std::abs(signed_area(vertices[tris[k][0]], vertices[tris[k][1]], vertices[tris[k][2]]));
    double e_in = 0.0, e_all = 0.0;
    for (int t = 0; t < nt; ++t)
        if (parent.region(t) == Region::observation) {
            e_all += parent.area(t);
            e_in += std::min(piece_area[t], parent.area(t));
        }
    Submesh sub{Mesh(std::move(vertices), std::move(tris), std::move(labels), std::move(boundary)),
                std::move(parent_vertex), std::move(parent_triangle), e_in / e_all};
    if (sub.mesh.num_interior() == 0) throw SubmeshError(fmt::format("{}: no interior nodes", what));
    return sub;
}

DirichletResult solve_dirichlet_on(const Submesh& sub, const FemSystem& parent, const SolverOptions& solver) {
    const FemSystem sys(sub.mesh, parent.data(), solver);
    DirichletResult r;
    r.Y = extend_interior(sub.mesh, sys.solver().solve(sys.F()));
    r.Y_parent = Vector::Zero(parent.mesh().num_vertices());
    for (int i = 0; i < sub.mesh.num_vertices(); ++i)
        if (sub.parent_vertex[i] >= 0) r.Y_parent[sub.parent_vertex[i]] = r.Y[i];

    // Part of E inside the submesh, plus y = 0 on the rest of E:
    // ∫_E j(x, 0) minus its share over the submesh.
    const Vector zero_sub = Vector::Zero(sub.mesh.num_vertices());
    r.J1 = eval_J1(sys, r.Y) + eval_J1(parent, Vector::Zero(parent.mesh().num_vertices())) - eval_J1(sys, zero_sub);
    r.triangles = sub.mesh.num_triangles();
    r.vertices = sub.mesh.num_vertices();
    r.observation_coverage = sub.observation_coverage;
    for (int t = 0; t < sub.mesh.num_triangles(); ++t) r.area += sub.mesh.area(t);
    return r;
}

namespace {

double centroid_value(const Mesh& mesh, const Vector& nodal, int t) {
    const auto& tri = mesh.triangle(t);
    return (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]) / 3.0;
}

}  // namespace

CompareReport compare_domains(const FemSystem& sys, const Vector& G, const Vector& Y_full, DomainApprox approx,
                              const SolverOptions& solver) {
    const Mesh& mesh = sys.mesh();
    CompareReport rep;
    const Vector minus_y = -Y_full;
    const bool cut = approx == DomainApprox::cut;
    const char* what_g = "domain {g_h < 0}";
    const char* what_y = "domain inside the zero level set of y";
    const Submesh a = cut ? clip_to_level(mesh, G, what_g)
                          : extract_submesh(mesh, [&](int t) { return centroid_value(mesh, G, t) < 0; }, what_g);
    rep.omega_g = solve_dirichlet_on(a, sys, solver);
    const Submesh b = cut ? clip_to_level(mesh, minus_y, what_y)
                          : extract_submesh(mesh, [&](int t) { return centroid_value(mesh, Y_full, t) > 0; }, what_y);
    rep.zero_level = solve_dirichlet_on(b, sys, solver);
    return rep;
}

}  // namespace topopt
