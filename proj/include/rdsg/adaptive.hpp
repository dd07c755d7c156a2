#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rdsg/config.hpp"
#include "rdsg/estimators.hpp"
#include "rdsg/galerkin.hpp"
#include "rdsg/kl_field.hpp"
#include "rdsg/moments.hpp"

namespace rdsg {

enum class Refinement { none, mesh, stochastic, rank };
std::string to_string(Refinement r);

/// Largest of the three contributions decides; ties prefer mesh, then stochastic.
Refinement dispatch(double eta, double zeta, double iota);

/// Per-cell share of the squared jump indicators: half of eta_S^2 to each adjacent cell.
std::vector<double> jump_distribution(const TriMesh& mesh, const std::vector<double>& eta_S);
/// sqrt(eta_T^2 + distributed jumps), the quantity passed to Doerfler marking.
std::vector<double> mesh_indicators(const TriMesh& mesh, const std::vector<double>& eta_T,
                                    const std::vector<double>& eta_S);

/// Embeds W into the P1 space on a refinement and zero-pads the stochastic modes.
TensorTrain prolong(const TensorTrain& W, const FeSpaceP1& old_space, const FeSpaceP1& new_space,
                    const std::vector<int>& new_dims);

/// Coefficient and load tensors reconstructed from samples of the transported data.
struct DataTT {
    CoefficientTT coef;
    TensorTrain f;
    double holdout = 0.0;  ///< relative holdout error of (a11, a12, a22, f) taken together
    int samples = 0;
};
DataTT reconstruct_data(const KLExpansion& kl, const std::vector<int>& xi_dims, int n_samples, int rank,
                        int sweeps, std::uint64_t seed);

struct IterationRecord {
    int iter = 0;
    int dofs = 0;
    std::int64_t tt_dofs = 0;
    std::vector<int> dims;
    std::vector<int> ranks;
    EstimatorReport report;
    Refinement refined = Refinement::none;
    std::vector<double> iota_history;
    bool als_monotone = true;
    int als_sweeps = 0;
    double tau = 0.0;
    double holdout = 0.0;
    int samples = 0;
    std::size_t mesh_index = 0;  ///< into LoopState::meshes
    MomentFields moments;        ///< TT moments on that mesh
    double seconds_reconstruct = 0.0;
    double seconds_solve = 0.0;
    double seconds_estimate = 0.0;
};

struct LoopState {
    std::vector<std::shared_ptr<const TriMesh>> meshes;  ///< one entry per iteration (shared when unchanged)
    std::shared_ptr<const TriMesh> mesh;
    std::vector<int> dims;
    TensorTrain W;
    KLExpansion kl;  ///< expansion on the KL mesh
    std::vector<IterationRecord> history;
    double tau = 0.0;
    std::vector<std::string> warnings;
};

/// KL expansion of the reference kernel (scaled by cfg.kernel_scale) on the KL mesh.
KLExpansion build_kl(const RunConfig& cfg);

/// Reconstruct / solve / estimate / refine until Theta < epsilon or a cap is reached.
using IterationCallback = std::function<void(const IterationRecord&)>;
LoopState run_adaptive(const RunConfig& cfg, const IterationCallback& progress = {});
LoopState run_adaptive(const RunConfig& cfg, const KLExpansion& kl, const IterationCallback& progress = {});

/// Fraction of cells whose centroid lies within radius of corner.
double corner_fraction(const TriMesh& mesh, const Point& corner, double radius);

struct ConvergenceRow {
    int dofs = 0;
    std::int64_t tt_dofs = 0;
    double e_E = 0.0;
    double e_V = 0.0;
    double theta = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    MomentFields reference;  ///< on the fine mesh
    std::shared_ptr<const TriMesh> fine;
    double alpha_E = 0.0;
    double alpha_V = 0.0;
    double alpha_theta = 0.0;
    double mean_se_rel = 0.0;      ///< MC standard error relative to |E_ref|_{H1}
    double variance_se_rel = 0.0;  ///< relative to |V_ref|_{W11}
};

/// Sampling reference on the final mesh refined once, errors of every iteration
/// (prolonged to that mesh) and fitted rates over mesh dofs.
ConvergenceStudy convergence_study(const LoopState& state, const RunConfig& cfg);

}  // namespace rdsg
