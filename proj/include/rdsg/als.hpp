#pragma once

#include <cstdint>
#include <vector>

#include "rdsg/galerkin.hpp"
#include "rdsg/tensor_train.hpp"

namespace rdsg {

struct AlsConfig {
    int max_sweeps = 10;
    double tol = 1e-6;        ///< stop on relative iota improvement below this
    double reg = 0.0;         ///< ridge relative to the local trace (a tiny one is retried on failure)
    double pcg_tol = 1e-12;   ///< relative residual of the physical-core CG
    int pcg_max_iter = 2000;
    std::uint64_t seed = 1;

    void validate() const;
};

struct AlsResult {
    TensorTrain W;                     ///< left-orthogonal
    std::vector<double> iota_history;  ///< initial value, then one entry per sweep
    bool monotone = true;              ///< iota never increased beyond round-off
    bool converged = false;
    int sweeps = 0;
};

/// Minimizes |H^{-1/2}(L W - F)| over TTs with the ranks of W0, one component at a time.
AlsResult als_solve(const DiscreteOperatorTT& L, const TensorTrain& F, const TensorTrain& W0,
                    const PreconditionerH& H, const AlsConfig& cfg);

/// |H^{-1/2}(L W - F)|_F evaluated through a left-orthogonalized residual TT.
double iota_value(const TTOperator& L, const TensorTrain& W, const TensorTrain& F, const PreconditionerH& H);

/// W + scale |W| Z / |Z| with Z a seeded random rank-1 TT; every rank grows by one
/// (capped by the largest representable rank).
TensorTrain increase_rank(const TensorTrain& W, std::uint64_t seed, double scale = 1e-3);

}  // namespace rdsg
