#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rdsg/mesh.hpp"

namespace rdsg {

/// One entry of the 2x2 kernel: amplitude * exp(-rate * |cx * x - cxp * x'|^2).
struct GaussEntry {
    double amplitude = 0.0;
    double rate = 1.0;
    double cx = 1.0;
    double cxp = 1.0;

    double operator()(const Point& x, const Point& xp) const
    {
        return amplitude * std::exp(-rate * (cx * x - cxp * xp).squaredNorm());
    }
};

/// Matrix-valued Gaussian covariance of the random displacement field.
struct CovKernel {
    std::array<std::array<GaussEntry, 2>, 2> entry{};
    double scale = 1.0 / 1000.0;

    /// 5 exp(-2|x-x'|^2), exp(-0.1|2x-x'|^2); exp(-0.1|x-2x'|^2), 5 exp(-0.5|x-x'|^2), scaled by 1/1000.
    static CovKernel reference();

    double raw(int i, int j, const Point& x, const Point& xp) const { return scale * entry[i][j](x, xp); }
    /// (K_ij(x,x') + K_ji(x',x)) / 2.
    double sym(int i, int j, const Point& x, const Point& xp) const
    {
        return 0.5 * (raw(i, j, x, xp) + raw(j, i, xp, x));
    }
};

struct PivotedCholesky {
    Eigen::MatrixXd L;            ///< n x rank
    std::vector<int> pivots;
    std::vector<double> remaining_trace;  ///< after each pivot, starting with the initial trace
};

/// Greedy low-rank factorization of an SPSD matrix given by its diagonal and a
/// column evaluator. Stops once remaining trace <= rel_tol * initial trace.
PivotedCholesky pivoted_cholesky(const Eigen::VectorXd& diag, const std::function<Eigen::VectorXd(int)>& column,
                                 double rel_tol);

/// Truncated KL expansion of the displacement field, discretized on one mesh.
/// Pivoted Cholesky runs on the lumped-mass weighted nodal kernel matrix.
/// V(x, y) = x + sum_m y_m V_m(x) for y in [-1,1]^M.
class KLExpansion {
public:
    int num_modes() const noexcept { return M_; }
    const TriMesh& mesh() const noexcept { return *mesh_; }
    std::shared_ptr<const TriMesh> mesh_ptr() const noexcept { return mesh_; }
    double tolerance() const noexcept { return eps_; }

    /// Mode m at vertex v.
    Eigen::Vector2d mode_value(int m, int v) const { return modes_[m].row(v).transpose(); }
    /// d V_m / d x on cell c, row = component.
    const Eigen::Matrix2d& jacobian(int m, int c) const { return jac_[std::size_t(m) * mesh_->num_cells() + c]; }
    const std::vector<double>& gamma() const noexcept { return gamma_; }
    /// Discrete variance (L2 mass norm squared) of every unscaled mode, descending.
    const std::vector<double>& eigenvalues() const noexcept { return lambda_; }
    /// Vertex-mass inner products of modes (for orthogonality checks).
    Eigen::MatrixXd mode_gram() const;

    /// Same modes evaluated through the kernel on another mesh.
    KLExpansion on_mesh(std::shared_ptr<const TriMesh> mesh) const;

    /// V_m(x) at an arbitrary point.
    Eigen::Vector2d evaluate_mode(int m, const Point& x) const;

    friend KLExpansion kl_from_covariance(std::shared_ptr<const TriMesh> mesh, const CovKernel& kernel, double eps);
    friend KLExpansion kl_from_modes(std::shared_ptr<const TriMesh> mesh,
                                     const std::vector<Eigen::MatrixXd>& vertex_modes);

private:
    void finish_on_mesh();
    void compute_derived();

    std::shared_ptr<const TriMesh> mesh_;
    CovKernel kernel_;
    double eps_ = 0.0;
    int M_ = 0;
    std::vector<Point> pivot_points_;
    std::vector<int> pivot_comps_;
    Eigen::MatrixXd coef_;  ///< pivots x M
    std::vector<double> lambda_;
    std::vector<Eigen::MatrixXd> modes_;  ///< each N_V x 2
    std::vector<Eigen::Matrix2d> jac_;
    std::vector<double> gamma_;
};

KLExpansion kl_from_covariance(std::shared_ptr<const TriMesh> mesh, const CovKernel& kernel, double eps);

/// Arbitrary KL-like field directly from per-vertex mode values (tests and analytic checks).
KLExpansion kl_from_modes(std::shared_ptr<const TriMesh> mesh, const std::vector<Eigen::MatrixXd>& vertex_modes);

struct FieldEval {
    std::vector<Eigen::Matrix2d> J;
    std::vector<double> det;
    std::vector<Eigen::Matrix2d> A;
    std::vector<double> fhat;
};

using Forcing = std::function<double(const Point&)>;

/// Per-cell J = I + sum y_m C_m, det J, A = det J (J^T J)^{-1}, fhat = f(V(centroid)) det J.
/// Throws AdmissibilityError if det J <= 0 somewhere.
FieldEval field_eval(const KLExpansion& kl, std::span<const double> y, const Forcing& f = {});

struct UniformityEstimate {
    bool admissible = true;
    int bad_cell = -1;
    double min_det = 1.0;
    double c_lower = 1.0;  ///< smallest eigenvalue of A
    double c_upper = 1.0;  ///< largest eigenvalue of A
    double min_sv = 1.0;   ///< extreme singular values of J
    double max_sv = 1.0;
};
UniformityEstimate estimate_uniformity(const KLExpansion& kl, int n_samples, std::uint64_t seed);

/// M, gamma list, then per mode per cell the four entries of C.
void write_kl(std::ostream& out, const KLExpansion& kl);

}  // namespace rdsg
