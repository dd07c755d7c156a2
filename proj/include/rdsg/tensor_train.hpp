#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

namespace rdsg {

/// Order-3 TT component with entries (a, mu, b) stored row-major.
struct Core3 {
    int left = 1, n = 1, right = 1;
    Eigen::VectorXd data;

    Core3() = default;
    Core3(int l, int d, int r) : left(l), n(d), right(r), data(Eigen::VectorXd::Zero(std::int64_t(l) * d * r)) {}

    double& operator()(int a, int mu, int b) { return data[(std::int64_t(a) * n + mu) * right + b]; }
    double operator()(int a, int mu, int b) const { return data[(std::int64_t(a) * n + mu) * right + b]; }

    /// left x right matrix for fixed mu.
    Eigen::MatrixXd slice(int mu) const;
    /// Rows (a, mu), columns b.
    Eigen::MatrixXd left_unfolding() const;
    /// Rows a, columns (mu, b).
    Eigen::MatrixXd right_unfolding() const;
    static Core3 from_left_unfolding(const Eigen::MatrixXd& m, int n);
    static Core3 from_right_unfolding(const Eigen::MatrixXd& m, int n);
};

/// left-orthogonal: every stochastic core satisfies sum_mu V(mu) V(mu)^T = I, so
/// the norm lives in the physical core. right-orthogonal: the physical core and
/// cores 1..M-1 have orthonormal columns, the norm lives in the last core.
enum class Orthogonality { none, left, right };

/// V(i, mu_1..mu_M) = V0(i,:) V1(mu_1) ... VM(mu_M).
struct TensorTrain {
    Eigen::MatrixXd phys;  ///< N x r_0
    std::vector<Core3> cores;
    Orthogonality orth = Orthogonality::none;

    int order() const noexcept { return static_cast<int>(cores.size()); }
    int phys_dim() const noexcept { return static_cast<int>(phys.rows()); }
    std::vector<int> dims() const;
    /// (r_0, ..., r_{M-1}).
    std::vector<int> ranks() const;
    /// Throws std::invalid_argument on inconsistent ranks.
    void validate() const;
};

/// Dimension of the fixed-rank manifold: sum of component sizes minus sum r_m^2.
std::int64_t tt_dofs(const TensorTrain& tt);

/// Dense tensor stored with the physical index slowest: ((i*d1 + mu1)*d2 + mu2)...
TensorTrain tt_from_full(const Eigen::VectorXd& full, int n_phys, const std::vector<int>& dims, double tol);
Eigen::VectorXd tt_to_full(const TensorTrain& tt);

struct RoundResult {
    TensorTrain tt;
    double error_estimate = 0.0;  ///< root-sum-square of discarded singular values
};
/// Truncated HSVD. tol is relative to the norm and is spread as tol/sqrt(M)
/// per bond; max_ranks (empty = unlimited) caps each bond.
RoundResult tt_round(const TensorTrain& tt, double tol, const std::vector<int>& max_ranks = {});

double tt_eval(const TensorTrain& tt, int i, const std::vector<int>& mu);
/// All physical entries at one multi-index.
Eigen::VectorXd tt_eval_slice(const TensorTrain& tt, const std::vector<int>& mu);
double tt_dot(const TensorTrain& a, const TensorTrain& b);
double tt_norm(const TensorTrain& a);
TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b);
TensorTrain tt_scale(const TensorTrain& a, double s);
TensorTrain orthogonalize(const TensorTrain& tt, Orthogonality dir);
TensorTrain tt_random(int n_phys, const std::vector<int>& dims, const std::vector<int>& ranks, std::uint64_t seed);
/// Rank-1 TT that is constant in the parameters: phys(:,0) = v, cores = e_0.
TensorTrain tt_constant(const Eigen::VectorXd& v, const std::vector<int>& dims);
/// Zero-pads (or truncates) the stochastic modes to new_dims; ranks unchanged.
TensorTrain tt_resize_modes(const TensorTrain& tt, const std::vector<int>& new_dims);
/// Largest ranks representable for the given shape: min(N*prod d_left, prod d_right).
std::vector<int> tt_max_ranks(int n_phys, const std::vector<int>& dims);

void write_tt(std::ostream& out, const TensorTrain& tt);
TensorTrain read_tt(std::istream& in);

}  // namespace rdsg
