#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "rdsg/tensor_train.hpp"

namespace rdsg {

/// Parameter points (one row per sample) and per-sample per-cell values (N_0 x K).
struct SampleSet {
    std::vector<std::vector<double>> y;
    Eigen::MatrixXd values;
    std::uint64_t seed = 0;

    int size() const noexcept { return static_cast<int>(y.size()); }
};

/// Sample k of the uniform distribution on [-1,1]^M; depends only on (seed, k).
std::vector<double> draw_parameter(int M, std::uint64_t seed, std::uint64_t k);
std::vector<std::vector<double>> draw_parameters(int M, int K, std::uint64_t seed);

/// Fills values column by column from generator(y) (run in parallel over samples).
SampleSet make_samples(int M, int K, std::uint64_t seed, int n_cells,
                       const std::function<Eigen::VectorXd(const std::vector<double>&)>& generator);

struct ReconstructConfig {
    std::vector<int> dims;   ///< Legendre degree caps per parameter
    int max_rank = 4;        ///< capped per bond by the feasible maximum
    int max_sweeps = 20;
    double reg = 1e-12;      ///< ridge, relative to the local matrix trace
    double tol = 1e-8;       ///< stop on relative residual improvement below this
    std::uint64_t seed = 1;
};

struct ReconstructResult {
    TensorTrain tt;
    std::vector<double> residual_history;  ///< relative training RMS after each half-sweep
};

/// Alternating least squares fit of sum_k |W(., y_k) - b_k|^2 over TTs with
/// Legendre stochastic modes.
ReconstructResult reconstruct(const SampleSet& samples, const ReconstructConfig& cfg);

/// sqrt(sum_k |W(., y_k) - b_k|^2 / sum_k |b_k|^2); 0 for an all-zero set that is matched.
double holdout_error(const TensorTrain& tt, const SampleSet& samples);

/// W(., y) for a TT with Legendre stochastic modes.
Eigen::VectorXd tt_eval_at(const TensorTrain& tt, const std::vector<double>& y);

/// Largest local unknown count r_{m-1} d_m r_m (or N_0-independent r_0 for the physical core).
int largest_local_unknowns(const std::vector<int>& dims, int max_rank, int n_phys);

}  // namespace rdsg
