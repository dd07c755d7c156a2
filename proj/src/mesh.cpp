#include "rdsg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace rdsg {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

std::int64_t edge_key(int a, int b, int n)
{
    if (a > b) std::swap(a, b);
    return static_cast<std::int64_t>(a) * n + b;
}

// Rotate each cell so that its longest edge comes first (initial refinement edges).
void longest_edge_first(const std::vector<Point>& v, std::vector<std::array<int, 3>>& cells)
{
    for (auto& c : cells) {
        int best = 0;
        double best_len = -1.0;
        for (int j = 0; j < 3; ++j) {
            const double len = (v[c[(j + 1) % 3]] - v[c[j]]).norm();
            if (len > best_len + 1e-14) {
                best_len = len;
                best = j;
            }
        }
        std::rotate(c.begin(), c.begin() + best, c.end());
    }
}

TriMesh make_circle()
{
    std::vector<Point> v;
    v.emplace_back(0.0, 0.0);
    for (int k = 0; k < 4; ++k) {
        const double t = 0.5 * std::numbers::pi * k;
        v.emplace_back(0.5 * std::cos(t), 0.5 * std::sin(t));
    }
    for (int j = 0; j < 8; ++j) {
        const double t = 0.25 * std::numbers::pi * j;
        v.emplace_back(std::cos(t), std::sin(t));
    }
    auto inner = [](int k) { return 1 + (k % 4); };
    auto outer = [](int j) { return 5 + (j % 8); };
    std::vector<std::array<int, 3>> cells;
    for (int k = 0; k < 4; ++k) cells.push_back({0, inner(k), inner(k + 1)});
    for (int k = 0; k < 4; ++k) {
        cells.push_back({inner(k), outer(2 * k), outer(2 * k + 1)});
        cells.push_back({inner(k), outer(2 * k + 1), inner(k + 1)});
        cells.push_back({inner(k + 1), outer(2 * k + 1), outer(2 * k + 2)});
    }
    longest_edge_first(v, cells);
    return TriMesh(std::move(v), std::move(cells), BoundaryShape::unit_circle);
}

TriMesh make_lshape()
{
    std::vector<Point> v;
    std::unordered_map<int, int> id;
    auto vertex = [&](int i, int j) {
        const int key = i * 16 + j;
        auto it = id.find(key);
        if (it != id.end()) return it->second;
        const int n = static_cast<int>(v.size());
        v.emplace_back(-1.0 + 0.5 * i, -1.0 + 0.5 * j);
        id.emplace(key, n);
        return n;
    };
    std::vector<std::array<int, 3>> cells;
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            if (i >= 2 && j < 2) continue;  // removed quadrant [0,1]x[-1,0]
            const int sw = vertex(i, j), se = vertex(i + 1, j);
            const int ne = vertex(i + 1, j + 1), nw = vertex(i, j + 1);
            cells.push_back({sw, se, ne});
            cells.push_back({sw, ne, nw});
        }
    }
    longest_edge_first(v, cells);
    return TriMesh(std::move(v), std::move(cells), BoundaryShape::polygon);
}

}  // namespace

TriMesh::TriMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells,
                 BoundaryShape shape)
    : vertices_(std::move(vertices)), cells_(std::move(cells)), shape_(shape)
{
    build_topology();
}

void TriMesh::build_topology()
{
    const int nv = num_vertices();
    const int nc = num_cells();
    areas_.resize(nc);
    diameters_.resize(nc);
    cell_edges_.resize(nc);
    edges_.clear();
    std::unordered_map<std::int64_t, int> lookup;
    lookup.reserve(static_cast<std::size_t>(3 * nc));

    for (int c = 0; c < nc; ++c) {
        const auto& t = cells_[c];
        for (int j = 0; j < 3; ++j) {
            if (t[j] < 0 || t[j] >= nv) throw std::invalid_argument("cell vertex index out of range");
        }
        const double a = signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
        if (!(a > 0.0))
            throw std::invalid_argument("cell " + std::to_string(c) + " has non-positive area");
        areas_[c] = a;
        double diam = 0.0;
        for (int j = 0; j < 3; ++j) {
            const int va = t[j], vb = t[(j + 1) % 3];
            diam = std::max(diam, (vertices_[vb] - vertices_[va]).norm());
            const auto key = edge_key(va, vb, nv);
            auto it = lookup.find(key);
            if (it == lookup.end()) {
                Edge e;
                e.vertices = {va, vb};
                e.cells = {c, -1};
                const Point d = vertices_[vb] - vertices_[va];
                e.length = d.norm();
                e.normal = Point(d.y(), -d.x()) / e.length;
                const int id = static_cast<int>(edges_.size());
                edges_.push_back(e);
                lookup.emplace(key, id);
                cell_edges_[c][j] = id;
            } else {
                Edge& e = edges_[it->second];
                if (e.cells[1] >= 0)
                    throw std::invalid_argument("non-conforming mesh: edge shared by more than two cells");
                e.cells[1] = c;
                cell_edges_[c][j] = it->second;
            }
        }
        diameters_[c] = diam;
    }

    boundary_vertex_.assign(nv, 0);
    boundary_edge_.assign(edges_.size(), 0);
    interior_edges_.clear();
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edges_[e].is_boundary()) {
            boundary_edge_[e] = 1;
            boundary_vertex_[edges_[e].vertices[0]] = 1;
            boundary_vertex_[edges_[e].vertices[1]] = 1;
        } else {
            interior_edges_.push_back(static_cast<int>(e));
        }
    }
}

Point TriMesh::centroid(int c) const
{
    const auto& t = cells_[c];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

void TriMesh::set_vertex_parents(std::vector<std::array<int, 2>> parents)
{
    if (!parents.empty() && static_cast<int>(parents.size()) != num_vertices())
        throw std::invalid_argument("vertex parent table size mismatch");
    parents_ = std::move(parents);
}

double TriMesh::min_angle() const
{
    double best = std::numbers::pi;
    for (const auto& t : cells_) {
        for (int j = 0; j < 3; ++j) {
            const Point a = vertices_[t[(j + 1) % 3]] - vertices_[t[j]];
            const Point b = vertices_[t[(j + 2) % 3]] - vertices_[t[j]];
            const double ang = std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
            best = std::min(best, ang);
        }
    }
    return best;
}

TriMesh make_reference_domain(const std::string& name, int level)
{
    if (level < 0) throw std::invalid_argument("refinement level must be nonnegative");
    TriMesh mesh;
    if (name == "circle")
        mesh = make_circle();
    else if (name == "lshape")
        mesh = make_lshape();
    else
        throw std::invalid_argument("unknown reference domain '" + name + "'");
    for (int l = 0; l < level; ++l) mesh = refine_uniform(mesh);
    mesh.set_vertex_parents({});
    return mesh;
}

TriMesh refine(const TriMesh& mesh, std::span<const int> marked_cells)
{
    if (marked_cells.empty()) throw std::invalid_argument("refine: empty marked set");
    const int nc = mesh.num_cells();
    std::vector<char> edge_marked(mesh.num_edges(), 0);
    for (int c : marked_cells) {
        if (c < 0 || c >= nc) throw std::invalid_argument("refine: marked cell out of range");
        for (int e : mesh.cell_edges(c)) edge_marked[e] = 1;
    }
    // Closure: any cell with a marked edge must also bisect its refinement edge.
    for (bool changed = true; changed;) {
        changed = false;
        for (int c = 0; c < nc; ++c) {
            const auto& ce = mesh.cell_edges(c);
            if (!edge_marked[ce[0]] && (edge_marked[ce[1]] || edge_marked[ce[2]])) {
                edge_marked[ce[0]] = 1;
                changed = true;
            }
        }
    }

    std::vector<Point> vertices = mesh.vertices();
    std::vector<std::array<int, 2>> parents(vertices.size());
    for (int v = 0; v < mesh.num_vertices(); ++v) parents[v] = {v, v};
    std::vector<int> midpoint(mesh.num_edges(), -1);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (!edge_marked[e]) continue;
        const Edge& edge = mesh.edge(e);
        Point m = 0.5 * (mesh.vertex(edge.vertices[0]) + mesh.vertex(edge.vertices[1]));
        if (edge.is_boundary() && mesh.boundary_shape() == BoundaryShape::unit_circle) m.normalize();
        midpoint[e] = static_cast<int>(vertices.size());
        vertices.push_back(m);
        parents.push_back({edge.vertices[0], edge.vertices[1]});
    }

    std::vector<std::array<int, 3>> cells;
    cells.reserve(static_cast<std::size_t>(4 * nc));
    for (int c = 0; c < nc; ++c) {
        const auto [n0, n1, n2] = mesh.cell(c);
        const auto& ce = mesh.cell_edges(c);
        const int m0 = midpoint[ce[0]], m1 = midpoint[ce[1]], m2 = midpoint[ce[2]];
        if (m0 < 0) {
            cells.push_back({n0, n1, n2});
            continue;
        }
        // Bisection of (a, b, c) at the midpoint m of ab yields (c, a, m) and (b, c, m).
        if (m2 < 0) {
            cells.push_back({n2, n0, m0});
        } else {
            cells.push_back({m0, n2, m2});
            cells.push_back({n0, m0, m2});
        }
        if (m1 < 0) {
            cells.push_back({n1, n2, m0});
        } else {
            cells.push_back({m0, n1, m1});
            cells.push_back({n2, m0, m1});
        }
    }
    TriMesh refined(std::move(vertices), std::move(cells), mesh.boundary_shape());
    refined.set_vertex_parents(std::move(parents));
    return refined;
}

TriMesh refine_uniform(const TriMesh& mesh)
{
    std::vector<int> all(mesh.num_cells());
    std::iota(all.begin(), all.end(), 0);
    return refine(mesh, all);
}

std::vector<int> dorfler_mark(std::span<const double> indicators, double theta)
{
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0,1]");
    std::vector<int> order(indicators.size());
    std::iota(order.begin(), order.end(), 0);
    bool any_positive = false;
    for (double v : indicators) {
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("dorfler_mark: indicators must be finite and nonnegative");
        any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) throw std::invalid_argument("dorfler_mark: all indicators are zero");
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return indicators[a] > indicators[b]; });
    // Total accumulated in the same order as the greedy sum so theta = 1 closes exactly.
    double total = 0.0;
    for (int i : order) total += indicators[i] * indicators[i];
    std::vector<int> marked;
    double acc = 0.0;
    for (int i : order) {
        if (acc >= theta * total) break;
        marked.push_back(i);
        acc += indicators[i] * indicators[i];
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

void write_mesh(std::ostream& out, const TriMesh& mesh)
{
    out << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
    out << std::setprecision(17);
    for (const auto& p : mesh.vertices()) out << p.x() << ' ' << p.y() << '\n';
    for (const auto& c : mesh.cells()) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

TriMesh read_mesh(std::istream& in, BoundaryShape shape)
{
    int nv = 0, nc = 0;
    if (!(in >> nv >> nc) || nv < 0 || nc < 0) throw std::runtime_error("read_mesh: bad header");
    std::vector<Point> v(nv);
    for (auto& p : v) {
        if (!(in >> p.x() >> p.y())) throw std::runtime_error("read_mesh: truncated vertex block");
    }
    std::vector<std::array<int, 3>> cells(nc);
    for (auto& c : cells) {
        if (!(in >> c[0] >> c[1] >> c[2])) throw std::runtime_error("read_mesh: truncated cell block");
    }
    return TriMesh(std::move(v), std::move(cells), shape);
}

void write_field(std::ostream& out, const TriMesh& mesh, std::span<const double> values)
{
    if (static_cast<int>(values.size()) != mesh.num_vertices() &&
        static_cast<int>(values.size()) != mesh.num_cells())
        throw std::invalid_argument("write_field: value count matches neither vertices nor cells");
    write_mesh(out, mesh);
    out << std::setprecision(17);
    for (double x : values) out << x << '\n';
}

}  // namespace rdsg
