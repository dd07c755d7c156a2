#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rdsg/mesh.hpp"

namespace rdsg {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Continuous P1 space with homogeneous Dirichlet data eliminated: one dof per
/// interior vertex.
class FeSpaceP1 {
public:
    explicit FeSpaceP1(std::shared_ptr<const TriMesh> mesh);

    const TriMesh& mesh() const noexcept { return *mesh_; }
    std::shared_ptr<const TriMesh> mesh_ptr() const noexcept { return mesh_; }
    int num_dofs() const noexcept { return static_cast<int>(dof_vertex_.size()); }
    /// -1 for boundary vertices.
    int dof(int vertex) const { return vertex_dof_[vertex]; }
    int vertex_of_dof(int dof) const { return dof_vertex_[dof]; }
    /// Gradients of the three hat functions on cell c (local vertex order).
    const std::array<Eigen::Vector2d, 3>& gradients(int c) const { return grads_[c]; }

    /// Dof vector -> vertex values (zero on the boundary).
    Eigen::VectorXd extend(const Eigen::Ref<const Eigen::VectorXd>& dofs) const;
    /// Vertex values -> dof vector (boundary values dropped).
    Eigen::VectorXd restrict(const Eigen::Ref<const Eigen::VectorXd>& vertex_values) const;

private:
    std::shared_ptr<const TriMesh> mesh_;
    std::vector<int> vertex_dof_;
    std::vector<int> dof_vertex_;
    std::vector<std::array<Eigen::Vector2d, 3>> grads_;
};

/// Piecewise constants: one dof per cell.
class FeSpaceP0 {
public:
    explicit FeSpaceP0(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh)) {}
    const TriMesh& mesh() const noexcept { return *mesh_; }
    int num_dofs() const noexcept { return mesh_->num_cells(); }

private:
    std::shared_ptr<const TriMesh> mesh_;
};

/// Hat-function gradients of a triangle with the given vertices.
std::array<Eigen::Vector2d, 3> p1_gradients(const Point& a, const Point& b, const Point& c);

/// K(i,i') = sum_T |T| grad phi_i . (M_T grad phi_i') over interior dofs.
SparseMatrix assemble_stiffness_p0(const FeSpaceP1& space, std::span<const Eigen::Matrix2d> per_cell);
/// Same with M_T = I.
SparseMatrix assemble_laplacian(const FeSpaceP1& space);
/// Component (p, q) of the stiffness: entries sum_T w_T |T| d_p phi_i d_q phi_i'.
SparseMatrix assemble_directional_stiffness(const FeSpaceP1& space, std::span<const double> weights,
                                            int p, int q);
/// b(i) = sum_T value_T |T| / 3 over the cells touching vertex i.
Eigen::VectorXd assemble_load_p0(const FeSpaceP1& space, std::span<const double> per_cell);
/// Full P1 mass matrix over all vertices.
SparseMatrix assemble_mass_all_vertices(const TriMesh& mesh);
/// N_0 x N_dof matrix mapping dof values to the q-th partial derivative per cell.
SparseMatrix gradient_operator(const FeSpaceP1& space, int q);

/// Normal jumps chi|T1 . n_S - chi|T2 . n_S, one entry per interior edge
/// (order of mesh.interior_edges()).
std::vector<double> edge_jumps(const TriMesh& mesh, std::span<const Eigen::Vector2d> per_cell);

/// Per-cell gradients of a P1 function given by its vertex values.
std::vector<Eigen::Vector2d> cell_gradients(const TriMesh& mesh, std::span<const double> vertex_values);

/// |v|_{H^1} for vertex values v.
double h1_seminorm(const TriMesh& mesh, std::span<const double> vertex_values);
/// ||v||_{L^1} + ||grad v||_{L^1} (Euclidean gradient magnitude), integrated exactly for P1.
double w11_norm(const TriMesh& mesh, std::span<const double> vertex_values);
/// Exact integral of |v| over a triangle for a linear function with the given vertex values.
double abs_integral_linear(double area, double v0, double v1, double v2);

/// Interpolates vertex values from mesh.vertex_parents() (the coarse mesh) onto mesh.
std::vector<double> prolong_vertex_values(const TriMesh& fine, std::span<const double> coarse_values);

}  // namespace rdsg
