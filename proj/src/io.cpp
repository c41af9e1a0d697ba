#include "topopt/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

namespace topopt {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    return in;
}

fmt::ostream open_out(const fs::path& path) {
    try {
        return fmt::output_file(path.string());
    } catch (const std::system_error& e) {
        throw IoError(fmt::format("cannot open '{}' for writing: {}", path.string(), e.code().message()));
    }
}

/// Next line that is neither blank nor a '#' comment.
bool next_line(std::istream& in, std::string& line, int& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos || line[p] == '#') continue;
        return true;
    }
    return false;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double to_double(const std::string& s, const fs::path& path, int lineno) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw IoError(fmt::format("{}:{}: expected a number, got '{}'", path.string(), lineno, s));
}

}  // namespace

Mesh read_mesh(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw IoError(fmt::format("{}:{}: {}", path.string(), lineno, what));
    };
    auto header = [&](const char* key) {
        if (!next_line(in, line, lineno)) fail(fmt::format("missing '{}' header", key));
        std::istringstream ss(line);
        std::string word;
        long count = -1;
        if (!(ss >> word >> count) || word != key || count < 0) fail(fmt::format("expected '{} <count>'", key));
        return static_cast<int>(count);
    };

    const int n = header("vertices");
    std::vector<Vec2> vertices(n);
    std::vector<bool> boundary(n);
    for (int i = 0; i < n; ++i) {
        if (!next_line(in, line, lineno)) fail("unexpected end of file in vertex block");
        std::istringstream ss(line);
        int b = 0;
        if (!(ss >> vertices[i].x() >> vertices[i].y() >> b) || (b != 0 && b != 1)) fail("expected '<x1> <x2> <0|1>'");
        boundary[i] = b == 1;
    }
    const int m = header("triangles");
    std::vector<std::array<int, 3>> tris(m);
    std::vector<Region> labels(m);
    for (int t = 0; t < m; ++t) {
        if (!next_line(in, line, lineno)) fail("unexpected end of file in triangle block");
        std::istringstream ss(line);
        int label = 0;
        auto& tri = tris[t];
        if (!(ss >> tri[0] >> tri[1] >> tri[2] >> label) || (label != 0 && label != 1))
            fail("expected '<a> <b> <c> <0|1>'");
        for (int k : tri)
            if (k < 0 || k >= n) fail(fmt::format("vertex index {} out of range", k));
        labels[t] = static_cast<Region>(label);
    }
    try {
        return Mesh(std::move(vertices), std::move(tris), std::move(labels), std::move(boundary));
    } catch (const MeshError& e) {
        throw IoError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_mesh(const fs::path& path, const Mesh& mesh) {
    auto out = open_out(path);
    out.print("# {} vertices, {} triangles; label 1 = observation region\n", mesh.num_vertices(),
              mesh.num_triangles());
    out.print("vertices {}\n", mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i)
        out.print("{:.17g} {:.17g} {}\n", mesh.vertex(i).x(), mesh.vertex(i).y(), mesh.on_boundary(i) ? 1 : 0);
    out.print("triangles {}\n", mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        out.print("{} {} {} {}\n", tri[0], tri[1], tri[2], static_cast<int>(mesh.region(t)));
    }
}

void write_vtk(const fs::path& path, const Mesh& mesh, const std::vector<VtkField>& fields) {
    auto out = open_out(path);
    const int n = mesh.num_vertices(), m = mesh.num_triangles();
    out.print("# vtk DataFile Version 3.0\ntopopt\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.print("POINTS {} double\n", n);
    for (int i = 0; i < n; ++i) out.print("{:.17g} {:.17g} 0\n", mesh.vertex(i).x(), mesh.vertex(i).y());
    out.print("CELLS {} {}\n", m, 4 * m);
    for (int t = 0; t < m; ++t) {
        const auto& tri = mesh.triangle(t);
        out.print("3 {} {} {}\n", tri[0], tri[1], tri[2]);
    }
    out.print("CELL_TYPES {}\n", m);
    for (int t = 0; t < m; ++t) out.print("5\n");
    out.print("CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default\n", m);
    for (int t = 0; t < m; ++t) out.print("{}\n", static_cast<int>(mesh.region(t)));
    if (fields.empty()) return;
    out.print("POINT_DATA {}\n", n);
    for (const auto& f : fields) {
        if (f.values.size() != n)
            throw IoError(fmt::format("field '{}' has {} values for {} points", f.name, f.values.size(), n));
        out.print("SCALARS {} double 1\nLOOKUP_TABLE default\n", f.name);
        for (int i = 0; i < n; ++i) out.print("{:.17g}\n", f.values[i]);
    }
}

VtkData read_vtk(const fs::path& path) {
    std::ifstream in = open_in(path);
    VtkData d;
    auto fail = [&](const std::string& what) { throw IoError(fmt::format("{}: {}", path.string(), what)); };
    std::string word;
    std::string line;
    for (int i = 0; i < 4; ++i) std::getline(in, line);  // version, title, ASCII, DATASET
    if (line.find("UNSTRUCTURED_GRID") == std::string::npos) fail("not an unstructured-grid VTK file");

    std::map<std::string, Vector>* section = nullptr;
    long section_size = 0;
    while (in >> word) {
        if (word == "POINTS") {
            long n = 0;
            in >> n >> word;
            d.points.resize(n);
            double z = 0;
            for (auto& p : d.points) in >> p.x() >> p.y() >> z;
        } else if (word == "CELLS") {
            long m = 0, total = 0;
            in >> m >> total;
            d.triangles.resize(m);
            for (auto& tri : d.triangles) {
                int k = 0;
                in >> k;
                if (k != 3) fail("only triangle cells are supported");
                in >> tri[0] >> tri[1] >> tri[2];
            }
        } else if (word == "CELL_TYPES") {
            long m = 0;
            in >> m;
            for (long t = 0, type = 0; t < m; ++t) in >> type;
        } else if (word == "CELL_DATA" || word == "POINT_DATA") {
            in >> section_size;
            section = word == "CELL_DATA" ? &d.cell_data : &d.point_data;
        } else if (word == "SCALARS") {
            if (!section) fail("SCALARS outside a data section");
            std::string name, type;
            in >> name >> type;
            std::getline(in, line);  // optional component count
            in >> word >> word;      // LOOKUP_TABLE default
            Vector v(section_size);
            for (long i = 0; i < section_size; ++i) in >> v[i];
            (*section)[name] = std::move(v);
        } else {
            fail(fmt::format("unexpected keyword '{}'", word));
        }
        if (!in) fail("truncated file");
    }
    return d;
}

void write_history_csv(const fs::path& path, const std::vector<IterationRecord>& history) {
    std::size_t C = 0;
    for (const auto& r : history) C = std::max(C, r.cost.penalty.size());
    auto out = open_out(path);
    out.print("iter,J1");
    for (std::size_t c = 1; c <= C; ++c) out.print(",penalty_{}", c);
    out.print(",total,lambda,gamma,slope,r_norm,v_norm,components,failed_trials,seconds\n");
    for (const auto& r : history) {
        out.print("{},{:.17g}", r.iter, r.cost.J1);
        for (std::size_t c = 0; c < C; ++c) {
            if (c < r.cost.penalty.size())
                out.print(",{:.17g}", r.cost.penalty[c]);
            else
                out.print(",");
        }
        out.print(",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{:.6f}\n", r.cost.total, r.lambda, r.gamma,
                  r.slope, r.r_norm, r.v_norm, r.components, r.failed_trials, r.seconds);
    }
}

std::vector<IterationRecord> read_history_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) throw IoError(fmt::format("{}: empty history file", path.string()));
    const auto head = split_csv(line);
    const std::size_t C = head.size() >= 11 ? head.size() - 11 : 0;
    if (head.size() != C + 11 || head[0] != "iter" || head[1] != "J1")
        throw IoError(fmt::format("{}: unrecognized history header", path.string()));

    std::vector<IterationRecord> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cell = split_csv(line);
        if (cell.size() != head.size())
            throw IoError(fmt::format("{}:{}: expected {} columns, got {}", path.string(), lineno, head.size(),
                                      cell.size()));
        auto num = [&](std::size_t i) { return to_double(cell[i], path, lineno); };
        IterationRecord r;
        r.iter = static_cast<int>(num(0));
        r.cost.J1 = num(1);
        for (std::size_t c = 0; c < C; ++c)
            if (!cell[2 + c].empty()) r.cost.penalty.push_back(num(2 + c));
        std::size_t i = 2 + C;
        r.cost.total = num(i++);
        r.lambda = num(i++);
        r.gamma = num(i++);
        r.slope = num(i++);
        r.r_norm = num(i++);
        r.v_norm = num(i++);
        r.components = static_cast<int>(num(i++));
        r.failed_trials = static_cast<int>(num(i++));
        r.seconds = num(i++);
        out.push_back(std::move(r));
    }
    return out;
}

void write_orbits_csv(const fs::path& path, const std::vector<Trajectory>& orbits) {
    auto out = open_out(path);
    out.print("component,k,t,x1,x2\n");
    for (std::size_t c = 0; c < orbits.size(); ++c) {
        const Trajectory& Z = orbits[c];
        for (std::size_t k = 0; k < Z.Z.size(); ++k)
            out.print("{},{},{:.17g},{:.17g},{:.17g}\n", c, k, static_cast<double>(k) * Z.dt, Z.Z[k].x(), Z.Z[k].y());
    }
}

std::vector<Trajectory> read_orbits_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line) || line != "component,k,t,x1,x2")
        throw IoError(fmt::format("{}: unrecognized orbit header", path.string()));
    std::vector<Trajectory> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cell = split_csv(line);
        if (cell.size() != 5) throw IoError(fmt::format("{}:{}: expected 5 columns", path.string(), lineno));
        const int c = static_cast<int>(to_double(cell[0], path, lineno));
        const double t = to_double(cell[2], path, lineno);
        if (c != static_cast<int>(out.size()) - 1) {
            if (c != static_cast<int>(out.size()))
                throw IoError(fmt::format("{}:{}: components must be consecutive", path.string(), lineno));
            out.emplace_back();
            out.back().component = c;
        }
        Trajectory& Z = out.back();
        Z.Z.emplace_back(to_double(cell[3], path, lineno), to_double(cell[4], path, lineno));
        if (Z.Z.size() == 2) Z.dt = t;
    }
    for (auto& Z : out)
        if (!Z.Z.empty()) Z.seed = Z.Z.front();
    return out;
}

std::vector<Segment> zero_level_segments(const Mesh& mesh, const Vector& nodal) {
    std::vector<Segment> out;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        Vec2 cut[3];
        int found = 0;
        for (int k = 0; k < 3; ++k) {
            const int u = tri[k], v = tri[(k + 1) % 3];
            const double a = nodal[u], b = nodal[v];
            if ((a < 0) == (b < 0)) continue;
            const double s = a / (a - b);
            cut[found++] = (1 - s) * mesh.vertex(u) + s * mesh.vertex(v);
        }
        if (found == 2) out.push_back({cut[0], cut[1]});
    }
    return out;
}

void write_segments_csv(const fs::path& path, const std::vector<Segment>& segments) {
    auto out = open_out(path);
    out.print("x1a,x2a,x1b,x2b\n");
    for (const auto& s : segments)
        out.print("{:.17g},{:.17g},{:.17g},{:.17g}\n", s.a.x(), s.a.y(), s.b.x(), s.b.y());
}

double total_length(const std::vector<Segment>& segments) {
    double len = 0.0;
    for (const auto& s : segments) len += (s.b - s.a).norm();
    return len;
}

}  // namespace topopt
