#include "topopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

namespace topopt {

namespace {

constexpr double kBaryTol = 1e-12;

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

std::vector<Region> label_by_barycenter(const std::vector<Vec2>& v,
                                        const std::vector<std::array<int, 3>>& tris,
                                        const Polygon& e_polygon) {
    std::vector<Region> labels(tris.size(), Region::complement);
    if (e_polygon.empty()) return labels;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Vec2 c = (v[tris[t][0]] + v[tris[t][1]] + v[tris[t][2]]) / 3.0;
        if (point_in_polygon(e_polygon, c)) labels[t] = Region::observation;
    }
    return labels;
}

}  // namespace

OutsideDomainError::OutsideDomainError(const Vec2& p)
    : MeshError(fmt::format("point ({:.12g}, {:.12g}) lies outside the domain", p.x(), p.y())),
      point(p) {}

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<Region> labels, std::vector<bool> boundary)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      labels_(std::move(labels)),
      boundary_(std::move(boundary)) {
    validate();
    build_topology();
    build_buckets();
}

void Mesh::validate() const {
    const int n = num_vertices();
    if (n == 0 || triangles_.empty()) throw MeshError("mesh has no vertices or no triangles");
    if (static_cast<int>(boundary_.size()) != n)
        throw MeshError("boundary flag count does not match vertex count");
    if (labels_.size() != triangles_.size())
        throw MeshError("every triangle needs exactly one region label");
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        for (int k : triangles_[t]) {
            if (k < 0 || k >= n)
                throw MeshError(fmt::format("triangle {} references vertex {} (mesh has {} vertices)",
                                            t, k, n));
        }
        const auto& tri = triangles_[t];
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw MeshError(fmt::format("triangle {} repeats a vertex", t));
        const double a = signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
        if (!(a > 0.0))
            throw MeshError(fmt::format("triangle {} has nonpositive signed area {}", t, a));
        if (labels_[t] != Region::complement && labels_[t] != Region::observation)
            throw MeshError(fmt::format("triangle {} carries an unknown region label", t));
    }
}

void Mesh::build_topology() {
    const int n = num_vertices();
    const int nt = num_triangles();
    areas_.resize(nt);
    hat_grads_.resize(nt);
    stars_.assign(n, {});
    neighbors_.assign(nt, {-1, -1, -1});

    Vec2 lo = vertices_[0], hi = vertices_[0];
    for (const auto& p : vertices_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bbox_ = {lo.x(), hi.x(), lo.y(), hi.y()};

    // directed edge (a,b) -> (triangle, local vertex opposite)
    std::map<std::pair<int, int>, std::pair<int, int>> edges;
    h_ = 0.0;
    for (int t = 0; t < nt; ++t) {
        const auto& tri = triangles_[t];
        const Vec2& a = vertices_[tri[0]];
        const Vec2& b = vertices_[tri[1]];
        const Vec2& c = vertices_[tri[2]];
        const double area = signed_area(a, b, c);
        areas_[t] = area;
        const double inv = 1.0 / (2.0 * area);
        hat_grads_[t] = {Vec2((b.y() - c.y()) * inv, (c.x() - b.x()) * inv),
                         Vec2((c.y() - a.y()) * inv, (a.x() - c.x()) * inv),
                         Vec2((a.y() - b.y()) * inv, (b.x() - a.x()) * inv)};
        for (int k = 0; k < 3; ++k) {
            stars_[tri[k]].push_back(t);
            const int u = tri[(k + 1) % 3], v = tri[(k + 2) % 3];
            h_ = std::max(h_, (vertices_[u] - vertices_[v]).norm());
            if (!edges.emplace(std::make_pair(u, v), std::make_pair(t, k)).second)
                throw MeshError(fmt::format("edge ({}, {}) is used twice with the same orientation", u, v));
        }
    }
    for (const auto& [e, tk] : edges) {
        auto it = edges.find({e.second, e.first});
        if (it != edges.end()) {
            neighbors_[tk.first][tk.second] = it->second.first;
        } else if (!boundary_[e.first] || !boundary_[e.second]) {
            throw MeshError(fmt::format(
                "vertices {} and {} lie on a boundary edge but are not flagged as boundary "
                "(non-conforming mesh or wrong flags)", e.first, e.second));
        }
    }

    interior_index_.assign(n, -1);
    observation_index_.assign(n, -1);
    interior_nodes_.clear();
    observation_nodes_.clear();
    for (int i = 0; i < n; ++i) {
        if (!boundary_[i]) {
            interior_index_[i] = static_cast<int>(interior_nodes_.size());
            interior_nodes_.push_back(i);
        }
    }
    std::vector<bool> in_e(n, false);
    for (int t = 0; t < nt; ++t)
        if (labels_[t] == Region::observation)
            for (int k : triangles_[t]) in_e[k] = true;
    for (int i = 0; i < n; ++i) {
        if (in_e[i]) {
            observation_index_[i] = static_cast<int>(observation_nodes_.size());
            observation_nodes_.push_back(i);
        }
    }
}

void Mesh::build_buckets() {
    const double w = std::max(bbox_.xmax - bbox_.xmin, 1e-300);
    const double hgt = std::max(bbox_.ymax - bbox_.ymin, 1e-300);
    const double cells = std::max(1.0, num_triangles() / 2.0);
    const double side = std::sqrt(w * hgt / cells);
    bucket_nx_ = std::clamp(static_cast<int>(std::ceil(w / side)), 1, 4096);
    bucket_ny_ = std::clamp(static_cast<int>(std::ceil(hgt / side)), 1, 4096);
    buckets_.assign(static_cast<std::size_t>(bucket_nx_) * bucket_ny_, {});
    auto cell = [&](double v, double lo, double len, int count) {
        return std::clamp(static_cast<int>(std::floor((v - lo) / len * count)), 0, count - 1);
    };
    for (int t = 0; t < num_triangles(); ++t) {
        const auto& tri = triangles_[t];
        Vec2 lo = vertices_[tri[0]], hi = vertices_[tri[0]];
        for (int k = 1; k < 3; ++k) {
            lo = lo.cwiseMin(vertices_[tri[k]]);
            hi = hi.cwiseMax(vertices_[tri[k]]);
        }
        const int i0 = cell(lo.x(), bbox_.xmin, w, bucket_nx_), i1 = cell(hi.x(), bbox_.xmin, w, bucket_nx_);
        const int j0 = cell(lo.y(), bbox_.ymin, hgt, bucket_ny_), j1 = cell(hi.y(), bbox_.ymin, hgt, bucket_ny_);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * bucket_nx_ + i].push_back(t);
    }
}

std::array<double, 3> Mesh::barycentric(int t, const Vec2& p) const {
    const auto& tri = triangles_[t];
    const Vec2& a = vertices_[tri[0]];
    const auto& g = hat_grads_[t];
    const double l1 = g[1].dot(p - a);
    const double l2 = g[2].dot(p - a);
    return {1.0 - l1 - l2, l1, l2};
}

int Mesh::bucket_search(const Vec2& p) const {
    const double w = std::max(bbox_.xmax - bbox_.xmin, 1e-300);
    const double hgt = std::max(bbox_.ymax - bbox_.ymin, 1e-300);
    const int i = std::clamp(static_cast<int>(std::floor((p.x() - bbox_.xmin) / w * bucket_nx_)), 0, bucket_nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y() - bbox_.ymin) / hgt * bucket_ny_)), 0, bucket_ny_ - 1);
    for (int t : buckets_[static_cast<std::size_t>(j) * bucket_nx_ + i]) {
        const auto b = barycentric(t, p);
        if (std::min({b[0], b[1], b[2]}) >= -kBaryTol) return t;
    }
    return -1;
}

int Mesh::lowest_containing(int t, const Vec2& p) const {
    const auto b = barycentric(t, p);
    if (std::min({b[0], b[1], b[2]}) > kBaryTol) return t;
    int best = t;
    for (int v : triangles_[t]) {
        for (int s : stars_[v]) {
            if (s >= best) break;  // stars are sorted
            const auto bs = barycentric(s, p);
            if (std::min({bs[0], bs[1], bs[2]}) >= -kBaryTol) best = s;
        }
    }
    return best;
}

Location Mesh::locate(const Vec2& p, int hint) const {
    const double slack = kBaryTol * std::max(1.0, h_);
    if (!(p.x() >= bbox_.xmin - slack && p.x() <= bbox_.xmax + slack && p.y() >= bbox_.ymin - slack &&
          p.y() <= bbox_.ymax + slack))
        throw OutsideDomainError(p);

    int t = (hint >= 0 && hint < num_triangles()) ? hint : 0;
    int found = -1;
    const int max_steps = 64 + 4 * static_cast<int>(std::sqrt(static_cast<double>(num_triangles())));
    for (int step = 0; step < max_steps; ++step) {
        const auto b = barycentric(t, p);
        const int k = static_cast<int>(std::min_element(b.begin(), b.end()) - b.begin());
        if (b[k] >= -kBaryTol) {
            found = t;
            break;
        }
        const int nb = neighbors_[t][k];
        if (nb < 0) break;
        t = nb;
    }
    if (found < 0) found = bucket_search(p);
    if (found < 0) throw OutsideDomainError(p);
    found = lowest_containing(found, p);

    Location loc;
    loc.triangle = found;
    auto b = barycentric(found, p);
    double sum = 0.0;
    for (double& x : b) {
        x = std::clamp(x, 0.0, 1.0);
        sum += x;
    }
    for (double& x : b) x /= sum;
    loc.bary = b;
    return loc;
}

Polygon regular_polygon(const Vec2& center, double radius, int sides) {
    Polygon poly;
    poly.reserve(sides);
    for (int k = 0; k < sides; ++k) {
        const double a = 2.0 * std::numbers::pi * k / sides;
        poly.emplace_back(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a));
    }
    return poly;
}

bool point_in_polygon(const Polygon& poly, const Vec2& p) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

Mesh generate_rect_mesh(const Rect& bounds, int nx, int ny, const Polygon& e_polygon) {
    if (nx < 1 || ny < 1) throw MeshError(fmt::format("resolution {}x{} is below one cell per axis", nx, ny));
    if (!(bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin)) throw MeshError("empty rectangle");
    for (const auto& q : e_polygon) {
        if (!(q.x() > bounds.xmin && q.x() < bounds.xmax && q.y() > bounds.ymin && q.y() < bounds.ymax))
            throw MeshError("observation polygon touches or crosses the outer boundary");
    }
    std::vector<Vec2> v;
    std::vector<bool> boundary;
    v.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            v.emplace_back(bounds.xmin + (bounds.xmax - bounds.xmin) * i / nx,
                           bounds.ymin + (bounds.ymax - bounds.ymin) * j / ny);
            boundary.push_back(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<std::array<int, 3>> tris;
    tris.reserve(static_cast<std::size_t>(2) * nx * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
            if ((i + j) % 2 == 0) {
                tris.push_back({v00, v10, v11});
                tris.push_back({v00, v11, v01});
            } else {
                tris.push_back({v00, v10, v01});
                tris.push_back({v10, v11, v01});
            }
        }
    }
    auto labels = label_by_barycenter(v, tris, e_polygon);
    return Mesh(std::move(v), std::move(tris), std::move(labels), std::move(boundary));
}

Mesh generate_disk_mesh(const Vec2& center, double radius, int rings, int sectors, const Polygon& e_polygon) {
    if (rings < 1 || sectors < 3) throw MeshError("disk mesh needs rings >= 1 and sectors >= 3");
    std::vector<Vec2> v{center};
    std::vector<bool> boundary{false};
    std::vector<std::vector<int>> ring_ids{{0}};
    for (int j = 1; j <= rings; ++j) {
        const int count = j * sectors;
        std::vector<int> ids;
        for (int k = 0; k < count; ++k) {
            const double a = 2.0 * std::numbers::pi * k / count;
            const double r = radius * j / rings;
            ids.push_back(static_cast<int>(v.size()));
            v.emplace_back(center.x() + r * std::cos(a), center.y() + r * std::sin(a));
            boundary.push_back(j == rings);
        }
        ring_ids.push_back(std::move(ids));
    }
    std::vector<std::array<int, 3>> tris;
    auto push = [&](int a, int b, int c) {
        if (signed_area(v[a], v[b], v[c]) < 0) std::swap(b, c);
        tris.push_back({a, b, c});
    };
    for (int j = 1; j <= rings; ++j) {
        const auto& inner = ring_ids[j - 1];
        const auto& outer = ring_ids[j];
        const int na = static_cast<int>(inner.size()), nb = static_cast<int>(outer.size());
        if (j == 1) {
            for (int b = 0; b < nb; ++b) push(inner[0], outer[b], outer[(b + 1) % nb]);
            continue;
        }
        int ia = 0, ib = 0;
        while (ia < na || ib < nb) {
            // advance along whichever ring reaches the smaller next angle
            const double next_a = static_cast<double>(ia + 1) / na;
            const double next_b = static_cast<double>(ib + 1) / nb;
            if (ib < nb && (ia >= na || next_b <= next_a)) {
                push(inner[ia % na], outer[ib], outer[(ib + 1) % nb]);
                ++ib;
            } else {
                push(inner[ia], outer[ib % nb], inner[(ia + 1) % na]);
                ++ia;
            }
        }
    }
    auto labels = label_by_barycenter(v, tris, e_polygon);
    return Mesh(std::move(v), std::move(tris), std::move(labels), std::move(boundary));
}

DiscreteDerivativeOps build_pih(const Mesh& mesh) {
    const int n = mesh.num_vertices();
    std::vector<Eigen::Triplet<double>> t1, t2;
    for (int i = 0; i < n; ++i) {
        double total = 0.0;
        for (int t : mesh.vertex_star(i)) total += mesh.area(t);
        for (int t : mesh.vertex_star(i)) {
            const double w = mesh.area(t) / total;
            const auto& tri = mesh.triangle(t);
            const auto& g = mesh.hat_gradients(t);
            for (int a = 0; a < 3; ++a) {
                t1.emplace_back(i, tri[a], w * g[a].x());
                t2.emplace_back(i, tri[a], w * g[a].y());
            }
        }
    }
    DiscreteDerivativeOps ops;
    ops.pi1.resize(n, n);
    ops.pi2.resize(n, n);
    ops.pi1.setFromTriplets(t1.begin(), t1.end());
    ops.pi2.setFromTriplets(t2.begin(), t2.end());
    return ops;
}

double interpolate(const Mesh& mesh, const Vector& nodal, const Location& loc) {
    const auto& tri = mesh.triangle(loc.triangle);
    return loc.bary[0] * nodal[tri[0]] + loc.bary[1] * nodal[tri[1]] + loc.bary[2] * nodal[tri[2]];
}

Vec2 element_gradient(const Mesh& mesh, const Vector& nodal, int t) {
    const auto& tri = mesh.triangle(t);
    const auto& g = mesh.hat_gradients(t);
    return nodal[tri[0]] * g[0] + nodal[tri[1]] * g[1] + nodal[tri[2]] * g[2];
}

Vector extend_interior(const Mesh& mesh, const Vector& interior) {
    Vector full = Vector::Zero(mesh.num_vertices());
    const auto& nodes = mesh.interior_nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k) full[nodes[k]] = interior[static_cast<Eigen::Index>(k)];
    return full;
}

Vector restrict_interior(const Mesh& mesh, const Vector& full) {
    const auto& nodes = mesh.interior_nodes();
    Vector out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[nodes[k]];
    return out;
}

}  // namespace topopt

namespace topopt {

std::vector<bool> topological_boundary(int num_vertices, const std::vector<std::array<int, 3>>& triangles) {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& tri : triangles)
        for (int k = 0; k < 3; ++k) {
            const int u = tri[k], v = tri[(k + 1) % 3];
            ++uses[{std::min(u, v), std::max(u, v)}];
        }
    std::vector<bool> flags(num_vertices, false);
    for (const auto& [e, count] : uses)
        if (count == 1) flags[e.first] = flags[e.second] = true;
    return flags;
}

}  // namespace topopt
