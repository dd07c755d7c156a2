#pragma once

#include <vector>

#include <Eigen/Core>

#include "rdsg/galerkin.hpp"
#include "rdsg/tensor_train.hpp"

namespace rdsg {

struct EstimatorWeights {
    double eta = 1.0;
    double zeta = 1.0;
    double iota = 1.0;
};

/// dual: H_0^{-1}-weighted residual slices; literal: L2 norm of the load tail only.
enum class ZetaNorm { dual, literal };

struct EstimatorReport {
    std::vector<double> eta_T;  ///< per cell
    std::vector<double> eta_S;  ///< per interior edge (order of mesh.interior_edges())
    double eta = 0.0;
    std::vector<double> zeta_m;
    double zeta_sum = 0.0;
    double zeta = 0.0;
    double iota = 0.0;
    EstimatorWeights weights;
    double theta = 0.0;
};

/// Sum over the multi-index box lo <= mu < hi of V(mu) V(mu)^T for the chain of
/// stochastic cores; returns the r_0 x r_0 Gram matrix.
Eigen::MatrixXd restricted_gram(const std::vector<Core3>& cores, const std::vector<int>& lo,
                                const std::vector<int>& hi);

/// eta_T = h_T |f restricted to Lambda|_{L2(T x Gamma)} for piecewise constant data f.
std::vector<double> eta_volume(const TensorTrain& f, const TriMesh& mesh, const std::vector<int>& lambda_dims);

/// eta_S = h_S |[[A grad w . n_S]]| in the stochastic L2 norm over Lambda.
std::vector<double> eta_jump(const TensorTrain& w, const CoefficientTT& coef, const FeSpaceP1& space,
                             const std::vector<int>& lambda_dims);

struct TailEstimate {
    std::vector<double> zeta_m;  ///< one layer nu_m = d_m beyond Lambda
    double zeta_sum = 0.0;
    double zeta = 0.0;           ///< whole tail Xi \ Lambda
    double iota = 0.0;           ///< same residual restricted to Lambda
};

/// Residual R = F_Xi - L_Xi w on the coefficient set Xi(Lambda).
TailEstimate zeta(const TensorTrain& w, const TensorTrain& f, const CoefficientTT& coef, const FeSpaceP1& space,
                  const PreconditionerH& H, const std::vector<int>& lambda_dims, ZetaNorm norm = ZetaNorm::dual);

double iota(const DiscreteOperatorTT& L, const TensorTrain& W, const TensorTrain& F, const PreconditionerH& H);

/// sqrt((c_eta eta + c_zeta zeta + c_iota iota)^2 + iota^2).
double combine(double eta, double zeta, double iota, const EstimatorWeights& w = {});

EstimatorReport estimate(const TensorTrain& w, const TensorTrain& f, const CoefficientTT& coef,
                         const FeSpaceP1& space, const PreconditionerH& H, const std::vector<int>& lambda_dims,
                         const EstimatorWeights& weights = {}, ZetaNorm norm = ZetaNorm::dual);

}  // namespace rdsg
