#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rdsg {

using Point = Eigen::Vector2d;

/// How vertices created on boundary edges are placed during refinement.
enum class BoundaryShape { polygon, unit_circle };

/// One mesh edge. For interior edges cells = {T1, T2} with T1 < T2 and
/// normal pointing out of T1; boundary edges have cells[1] == -1.
struct Edge {
    std::array<int, 2> vertices{};
    std::array<int, 2> cells{-1, -1};
    Point normal = Point::Zero();
    double length = 0.0;

    bool is_boundary() const noexcept { return cells[1] < 0; }
};

/// Conforming triangulation. Cells are stored counterclockwise as (n0, n1, n2);
/// the edge n0-n1 is the refinement edge used by newest-vertex bisection.
class TriMesh {
public:
    TriMesh() = default;
    TriMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells,
            BoundaryShape shape = BoundaryShape::polygon);

    int num_vertices() const noexcept { return static_cast<int>(vertices_.size()); }
    int num_cells() const noexcept { return static_cast<int>(cells_.size()); }
    int num_edges() const noexcept { return static_cast<int>(edges_.size()); }

    const Point& vertex(int v) const { return vertices_[v]; }
    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    const std::array<int, 3>& cell(int c) const { return cells_[c]; }
    const std::vector<std::array<int, 3>>& cells() const noexcept { return cells_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Edge& edge(int e) const { return edges_[e]; }
    /// Local edge j of cell c joins local vertices j and (j+1) mod 3.
    const std::array<int, 3>& cell_edges(int c) const { return cell_edges_[c]; }
    const std::vector<int>& interior_edges() const noexcept { return interior_edges_; }

    double area(int c) const { return areas_[c]; }
    double diameter(int c) const { return diameters_[c]; }
    Point centroid(int c) const;
    bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
    const std::vector<char>& boundary_edge_flags() const noexcept { return boundary_edge_; }

    BoundaryShape boundary_shape() const noexcept { return shape_; }

    /// For meshes produced by refine(): parents of every vertex in the coarse mesh.
    /// Inherited vertices have parents {v, v}; new vertices are midpoints of {a, b}.
    const std::vector<std::array<int, 2>>& vertex_parents() const noexcept { return parents_; }
    void set_vertex_parents(std::vector<std::array<int, 2>> parents);

    double min_angle() const;

private:
    void build_topology();

    std::vector<Point> vertices_;
    std::vector<std::array<int, 3>> cells_;
    BoundaryShape shape_ = BoundaryShape::polygon;

    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> cell_edges_;
    std::vector<int> interior_edges_;
    std::vector<double> areas_;
    std::vector<double> diameters_;
    std::vector<char> boundary_vertex_;
    std::vector<char> boundary_edge_;
    std::vector<std::array<int, 2>> parents_;
};

/// Reference domains: "circle" (unit disc, 16 cells at level 0) and
/// "lshape" ([-1,1]^2 minus [0,1]x[-1,0], 24 cells at level 0).
TriMesh make_reference_domain(const std::string& name, int level);

/// Newest-vertex bisection: every marked cell has all of its edges bisected,
/// then the closure restores conformity.
TriMesh refine(const TriMesh& mesh, std::span<const int> marked_cells);
TriMesh refine_uniform(const TriMesh& mesh);

/// Minimal set (greedy by descending value, ties to the lower index) whose
/// squared indicators reach theta times the total. Returned indices ascend.
std::vector<int> dorfler_mark(std::span<const double> indicators, double theta);

/// Plain-text mesh dump: "N_V N_C", vertex lines "x y", cell lines "i j k".
void write_mesh(std::ostream& out, const TriMesh& mesh);
TriMesh read_mesh(std::istream& in, BoundaryShape shape = BoundaryShape::polygon);
/// Mesh dump followed by one value per vertex or per cell.
void write_field(std::ostream& out, const TriMesh& mesh, std::span<const double> values);

}  // namespace rdsg
