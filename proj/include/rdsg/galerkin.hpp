#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "rdsg/fem.hpp"
#include "rdsg/legendre.hpp"
#include "rdsg/tensor_train.hpp"
#include "rdsg/tt_operator.hpp"

namespace rdsg {

/// Coefficient tensors on P0 physical modes: a11, a12 (= a21) and a22.
struct CoefficientTT {
    TensorTrain a11, a12, a22;
};

/// Galerkin operator as an unsummed list of four TT operators (11, 12, 21, 22).
struct DiscreteOperatorTT {
    std::vector<TTOperator> terms;
    std::vector<int> out_dims;
    std::vector<int> in_dims;

    int phys_dim() const { return static_cast<int>(terms.front().phys.front().rows()); }
    TensorTrain apply(const TensorTrain& x) const;
    /// All terms stacked into one operator (block-diagonal cores). Terms with
    /// identical stochastic cores (12 and 21) share one block.
    TTOperator stacked() const;
};

/// Physical core from P0 coefficients, stochastic cores O(k, a, a', k') =
/// sum_mu coef(k, mu, k') E[P_mu P_a P_a'].
DiscreteOperatorTT assemble_tt_operator(const CoefficientTT& coef, const FeSpaceP1& space,
                                        const std::vector<int>& out_dims, const std::vector<int>& in_dims);

/// F_0(:, k) = load vector of f^0(:, k); stochastic cores truncated or zero-padded to out_dims.
TensorTrain assemble_tt_rhs(const TensorTrain& f, const FeSpaceP1& space, const std::vector<int>& out_dims);

/// H = H_0 (x) I with H_0 the plain P1 stiffness matrix.
class PreconditionerH {
public:
    explicit PreconditionerH(const FeSpaceP1& space);

    const SparseMatrix& matrix() const noexcept { return H0_; }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    /// L^{-1} P X with P H_0 P^T = L L^T, so that |result|^2 = X^T H_0^{-1} X.
    Eigen::MatrixXd whiten(const Eigen::MatrixXd& x) const;

private:
    SparseMatrix H0_;
    Eigen::SimplicialLLT<SparseMatrix> llt_;
};

TensorTrain apply_preconditioner(const PreconditionerH& H, const TensorTrain& tt);
TensorTrain apply_preconditioner_inverse(const PreconditionerH& H, const TensorTrain& tt);

/// Per-dimension tables E[P_nu P_mu P_kappa], nu < out, mu < coef, kappa < in.
std::vector<TripleProductTable> triple_tables(const std::vector<int>& out_dims, const std::vector<int>& coef_dims,
                                              const std::vector<int>& in_dims);

}  // namespace rdsg
