#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "rdsg/fem.hpp"
#include "rdsg/kl_field.hpp"
#include "rdsg/tensor_train.hpp"

namespace rdsg {

/// Nodal mean, second moment and variance of a P1-valued random field.
struct MomentFields {
    std::vector<double> mean;
    std::vector<double> second;
    std::vector<double> variance;  ///< clipped at 0
    int samples = 0;               ///< 0 for moments computed from a TT
    double mean_se = 0.0;          ///< Monte Carlo standard error of the mean, H1 seminorm
    double variance_se = 0.0;      ///< Monte Carlo standard error of the variance, W^{1,1} norm
    double clipped = 0.0;          ///< largest magnitude removed by clipping
};

/// Direct sparse solve of the transported problem for one parameter sample; dof vector.
Eigen::VectorXd sample_solve(const KLExpansion& kl, const FeSpaceP1& space, const std::vector<double>& y,
                             const Forcing& f = {});

enum class SampleRule { mc, qmc };

/// Parameter point k of the rule on [-1,1]^M: i.i.d. uniform (mc) or a randomly shifted,
/// extensible rank-1 lattice in van der Corput order (qmc).
std::vector<double> rule_point(SampleRule rule, int M, std::uint64_t seed, std::uint64_t k);

/// Sampling reference: kl must live on space.mesh(). Samples run in fixed batches whose
/// partial sums are merged in batch order.
MomentFields reference_moments(const KLExpansion& kl, const FeSpaceP1& space, int n_samples, SampleRule rule,
                               std::uint64_t seed, const Forcing& f = {});

/// Mean = W(., 0); second moment = sum_k U_0(., k)^2 of the left-orthogonalized W.
MomentFields moments_tt(const TensorTrain& W, const FeSpaceP1& space);

struct ErrorMetrics {
    double e_E = 0.0;  ///< relative H1 seminorm error of the mean
    double e_V = 0.0;  ///< relative W^{1,1} error of the variance
};
/// Both fields given by vertex values on mesh.
ErrorMetrics error_metrics(const MomentFields& m, const MomentFields& ref, const TriMesh& mesh);

/// Least-squares slope alpha of log(error) = c - alpha log(dofs).
double fit_rate(const std::vector<double>& dofs, const std::vector<double>& errors);

/// Carries vertex values from chain[from] to chain.back(); consecutive meshes are either
/// identical or related by refine().
std::vector<double> prolong_along(const std::vector<std::shared_ptr<const TriMesh>>& chain, std::size_t from,
                                  std::vector<double> values);

}  // namespace rdsg
