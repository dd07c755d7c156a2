#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rdsg/tensor_train.hpp"

namespace rdsg {

/// Order-4 operator component with entries (p, mu_out, nu_in, q) stored row-major.
struct OpCore {
    int left = 1, out = 1, in = 1, right = 1;
    Eigen::VectorXd data;

    OpCore() = default;
    OpCore(int l, int o, int i, int r)
        : left(l), out(o), in(i), right(r), data(Eigen::VectorXd::Zero(std::int64_t(l) * o * i * r)) {}

    std::int64_t index(int p, int mu, int nu, int q) const
    {
        return ((std::int64_t(p) * out + mu) * in + nu) * right + q;
    }
    double& operator()(int p, int mu, int nu, int q) { return data[index(p, mu, nu, q)]; }
    double operator()(int p, int mu, int nu, int q) const { return data[index(p, mu, nu, q)]; }
};

/// L = sum_k L0[k] (x) L1(k, :, :, k1) (x) ... with sparse physical factors.
struct TTOperator {
    std::vector<Eigen::SparseMatrix<double>> phys;  ///< r_0 matrices N_out x N_in
    std::vector<OpCore> cores;

    int order() const noexcept { return static_cast<int>(cores.size()); }
    int rank0() const noexcept { return static_cast<int>(phys.size()); }
    std::vector<int> ranks() const;
    void validate() const;
};

/// Result ranks are products of operator and argument ranks; the combined bond
/// index is p * r_x + k.
TensorTrain tt_apply(const TTOperator& op, const TensorTrain& x);
TTOperator tt_identity_operator(int n_phys, const std::vector<int>& dims);
/// Dense matrix of a small operator, rows/cols ordered like tt_to_full.
Eigen::MatrixXd tt_operator_to_dense(const TTOperator& op);

}  // namespace rdsg
