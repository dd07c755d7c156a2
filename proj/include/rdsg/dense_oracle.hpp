#pragma once

#include <vector>

#include <Eigen/Core>

#include "rdsg/fem.hpp"
#include "rdsg/galerkin.hpp"
#include "rdsg/tensor_train.hpp"

// Brute-force reference computations for tiny instances. Everything here works
// on full tensors and tensor-product Gauss quadrature in the parameters; nothing
// uses triple-product tables or TT contractions other than point evaluation.

namespace rdsg::oracle {

/// Tensor Gauss rule on [-1,1]^M (probability measure) with n_m nodes per dimension.
struct ParamRule {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
};
ParamRule tensor_rule(const std::vector<int>& nodes);

/// prod_m P_{mu_m}(y_m) for every multi-index of the box, ordered like tt_to_full.
Eigen::VectorXd legendre_tensor(const std::vector<int>& dims, const std::vector<double>& y);

/// Dense Galerkin matrix, rows (i, nu) for nu < out_dims, columns (i', kappa) for kappa < in_dims.
Eigen::MatrixXd galerkin_matrix(const CoefficientTT& coef, const FeSpaceP1& space, const std::vector<int>& out_dims,
                                const std::vector<int>& in_dims);
Eigen::VectorXd galerkin_rhs(const TensorTrain& f, const FeSpaceP1& space, const std::vector<int>& out_dims);

/// Solution of the square Galerkin system.
Eigen::VectorXd galerkin_solve(const Eigen::MatrixXd& L, const Eigen::VectorXd& F);

struct Estimates {
    std::vector<double> eta_T, eta_S;
    double eta = 0.0;
    std::vector<double> zeta_m;
    double zeta = 0.0;
    double iota = 0.0;
};

/// All estimator parts from full tensors; w is ordered like tt_to_full on Lambda.
Estimates estimates(const Eigen::VectorXd& w, const TensorTrain& f, const CoefficientTT& coef,
                    const FeSpaceP1& space, const std::vector<int>& lambda_dims);

/// Classical residual estimator of the deterministic problem -div(grad u) = f with
/// piecewise constant f: per-cell h_T^2 |T| f^2 plus per-edge h_S^2 [[grad u . n]]^2.
struct ScalarEstimate {
    std::vector<double> eta_T, eta_S;
    double eta = 0.0;
};
ScalarEstimate scalar_residual_estimator(const TriMesh& mesh, const std::vector<double>& vertex_values,
                                         const std::vector<double>& f_per_cell);

}  // namespace rdsg::oracle
