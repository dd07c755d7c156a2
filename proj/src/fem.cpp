#include "rdsg/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace rdsg {

std::array<Eigen::Vector2d, 3> p1_gradients(const Point& a, const Point& b, const Point& c)
{
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    std::array<Eigen::Vector2d, 3> g;
    // grad phi_j = rot90(opposite edge) / (2|T|)
    g[0] = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det;
    g[1] = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det;
    g[2] = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
    return g;
}

FeSpaceP1::FeSpaceP1(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh))
{
    const TriMesh& m = *mesh_;
    vertex_dof_.assign(m.num_vertices(), -1);
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (!m.is_boundary_vertex(v)) {
            vertex_dof_[v] = static_cast<int>(dof_vertex_.size());
            dof_vertex_.push_back(v);
        }
    }
    grads_.resize(m.num_cells());
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& t = m.cell(c);
        grads_[c] = p1_gradients(m.vertex(t[0]), m.vertex(t[1]), m.vertex(t[2]));
    }
}

Eigen::VectorXd FeSpaceP1::extend(const Eigen::Ref<const Eigen::VectorXd>& dofs) const
{
    if (dofs.size() != num_dofs()) throw std::invalid_argument("extend: dof vector size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh_->num_vertices());
    for (int i = 0; i < num_dofs(); ++i) out[dof_vertex_[i]] = dofs[i];
    return out;
}

Eigen::VectorXd FeSpaceP1::restrict(const Eigen::Ref<const Eigen::VectorXd>& vertex_values) const
{
    if (vertex_values.size() != mesh_->num_vertices())
        throw std::invalid_argument("restrict: vertex vector size mismatch");
    Eigen::VectorXd out(num_dofs());
    for (int i = 0; i < num_dofs(); ++i) out[i] = vertex_values[dof_vertex_[i]];
    return out;
}

SparseMatrix assemble_stiffness_p0(const FeSpaceP1& space, std::span<const Eigen::Matrix2d> per_cell)
{
    const TriMesh& mesh = space.mesh();
    if (static_cast<int>(per_cell.size()) != mesh.num_cells())
        throw std::invalid_argument("assemble_stiffness_p0: one matrix per cell required");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(9 * mesh.num_cells()));
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const auto& g = space.gradients(c);
        const double area = mesh.area(c);
        for (int a = 0; a < 3; ++a) {
            const int i = space.dof(t[a]);
            if (i < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int j = space.dof(t[b]);
                if (j < 0) continue;
                trip.emplace_back(i, j, area * g[a].dot(per_cell[c] * g[b]));
            }
        }
    }
    SparseMatrix K(space.num_dofs(), space.num_dofs());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

SparseMatrix assemble_laplacian(const FeSpaceP1& space)
{
    std::vector<Eigen::Matrix2d> id(space.mesh().num_cells(), Eigen::Matrix2d::Identity());
    return assemble_stiffness_p0(space, id);
}

SparseMatrix assemble_directional_stiffness(const FeSpaceP1& space, std::span<const double> weights,
                                            int p, int q)
{
    const TriMesh& mesh = space.mesh();
    if (static_cast<int>(weights.size()) != mesh.num_cells())
        throw std::invalid_argument("assemble_directional_stiffness: one weight per cell required");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(9 * mesh.num_cells()));
    for (int c = 0; c < mesh.num_cells(); ++c) {
        if (weights[c] == 0.0) continue;
        const auto& t = mesh.cell(c);
        const auto& g = space.gradients(c);
        const double w = weights[c] * mesh.area(c);
        for (int a = 0; a < 3; ++a) {
            const int i = space.dof(t[a]);
            if (i < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int j = space.dof(t[b]);
                if (j < 0) continue;
                trip.emplace_back(i, j, w * g[a][p] * g[b][q]);
            }
        }
    }
    SparseMatrix K(space.num_dofs(), space.num_dofs());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

Eigen::VectorXd assemble_load_p0(const FeSpaceP1& space, std::span<const double> per_cell)
{
    const TriMesh& mesh = space.mesh();
    if (static_cast<int>(per_cell.size()) != mesh.num_cells())
        throw std::invalid_argument("assemble_load_p0: one value per cell required");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(space.num_dofs());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double w = per_cell[c] * mesh.area(c) / 3.0;
        for (int v : mesh.cell(c)) {
            const int i = space.dof(v);
            if (i >= 0) b[i] += w;
        }
    }
    return b;
}

SparseMatrix assemble_mass_all_vertices(const TriMesh& mesh)
{
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(9 * mesh.num_cells()));
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const double a = mesh.area(c);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], a * (i == j ? 2.0 : 1.0) / 12.0);
    }
    SparseMatrix M(mesh.num_vertices(), mesh.num_vertices());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

SparseMatrix gradient_operator(const FeSpaceP1& space, int q)
{
    const TriMesh& mesh = space.mesh();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(3 * mesh.num_cells()));
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const auto& g = space.gradients(c);
        for (int a = 0; a < 3; ++a) {
            const int i = space.dof(t[a]);
            if (i >= 0) trip.emplace_back(c, i, g[a][q]);
        }
    }
    SparseMatrix D(mesh.num_cells(), space.num_dofs());
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
}

std::vector<double> edge_jumps(const TriMesh& mesh, std::span<const Eigen::Vector2d> per_cell)
{
    if (static_cast<int>(per_cell.size()) != mesh.num_cells())
        throw std::invalid_argument("edge_jumps: one vector per cell required");
    std::vector<double> out;
    out.reserve(mesh.interior_edges().size());
    for (int e : mesh.interior_edges()) {
        const Edge& s = mesh.edge(e);
        out.push_back(per_cell[s.cells[0]].dot(s.normal) - per_cell[s.cells[1]].dot(s.normal));
    }
    return out;
}

std::vector<Eigen::Vector2d> cell_gradients(const TriMesh& mesh, std::span<const double> vertex_values)
{
    if (static_cast<int>(vertex_values.size()) != mesh.num_vertices())
        throw std::invalid_argument("cell_gradients: one value per vertex required");
    std::vector<Eigen::Vector2d> out(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const auto g = p1_gradients(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]));
        out[c] = vertex_values[t[0]] * g[0] + vertex_values[t[1]] * g[1] + vertex_values[t[2]] * g[2];
    }
    return out;
}

double h1_seminorm(const TriMesh& mesh, std::span<const double> vertex_values)
{
    const auto grads = cell_gradients(mesh, vertex_values);
    double s = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) s += mesh.area(c) * grads[c].squaredNorm();
    return std::sqrt(s);
}

double abs_integral_linear(double area, double v0, double v1, double v2)
{
    const int pos = (v0 > 0) + (v1 > 0) + (v2 > 0);
    const int neg = (v0 < 0) + (v1 < 0) + (v2 < 0);
    const double sum = v0 + v1 + v2;
    if (pos == 0 || neg == 0) return area * std::abs(sum) / 3.0;
    // One vertex carries the sign that is unique; the zero line cuts off a
    // similar sub-triangle at that vertex.
    double a, b, c;
    if (pos == 1) {
        a = v0 > 0 ? v0 : (v1 > 0 ? v1 : v2);
        b = v0 > 0 ? v1 : v0;
        c = v0 > 0 ? v2 : (v1 > 0 ? v2 : v1);
    } else {
        a = v0 < 0 ? v0 : (v1 < 0 ? v1 : v2);
        b = v0 < 0 ? v1 : v0;
        c = v0 < 0 ? v2 : (v1 < 0 ? v2 : v1);
    }
    const double tb = a / (a - b);
    const double tc = a / (a - c);
    const double s = a > 0 ? 1.0 : -1.0;
    return 2.0 * area * tb * tc * std::abs(a) / 3.0 - s * area * sum / 3.0;
}

double w11_norm(const TriMesh& mesh, std::span<const double> vertex_values)
{
    const auto grads = cell_gradients(mesh, vertex_values);
    double l1 = 0.0, g1 = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        l1 += abs_integral_linear(mesh.area(c), vertex_values[t[0]], vertex_values[t[1]], vertex_values[t[2]]);
        g1 += mesh.area(c) * grads[c].norm();
    }
    return l1 + g1;
}

std::vector<double> prolong_vertex_values(const TriMesh& fine, std::span<const double> coarse_values)
{
    const auto& parents = fine.vertex_parents();
    if (static_cast<int>(parents.size()) != fine.num_vertices())
        throw std::invalid_argument("prolong_vertex_values: mesh carries no refinement parents");
    std::vector<double> out(fine.num_vertices());
    for (int v = 0; v < fine.num_vertices(); ++v) {
        const auto [a, b] = parents[v];
        if (a < 0 || b < 0 || a >= static_cast<int>(coarse_values.size()) ||
            b >= static_cast<int>(coarse_values.size()))
            throw std::invalid_argument("prolong_vertex_values: coarse value vector too short");
        out[v] = 0.5 * (coarse_values[a] + coarse_values[b]);
    }
    return out;
}

}  // namespace rdsg
