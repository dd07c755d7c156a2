#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "rdsg/als.hpp"
#include "rdsg/estimators.hpp"
#include "rdsg/moments.hpp"

namespace rdsg {

enum class MeshRefinement { adaptive, uniform };

struct RunConfig {
    std::string domain = "circle";
    double kl_tol = 0.5;
    int kl_level = 2;            ///< refinement level of the mesh carrying the KL computation
    double kernel_scale = 1.0;   ///< multiplies the reference kernel (0 = deterministic domain)
    int mesh_level = 0;          ///< uniform refinements of the initial mesh
    double theta_eta = 0.2;
    double theta_zeta = 0.5;
    double epsilon = 1e-3;       ///< stop once Theta < epsilon
    int max_iter = 30;
    int max_dofs = 20000;
    int n_samples = 0;           ///< reconstruction samples; 0 = 20x the largest local unknown count
    int init_degree = 2;
    int init_rank = 2;
    int recon_rank = 0;          ///< 0 = M + 2
    int recon_sweeps = 20;
    AlsConfig als;
    EstimatorWeights weights;
    ZetaNorm zeta_norm = ZetaNorm::dual;
    MeshRefinement refinement = MeshRefinement::adaptive;
    double rank_scale = 1e-3;
    std::uint64_t seed = 1;
    int workers = 0;             ///< 0 = default (RDSG_WORKERS or hardware)
    int mc_samples = 2000;
    SampleRule mc_rule = SampleRule::mc;
    std::uint64_t mc_seed = 7;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and malformed
/// values raise ConfigError naming the line.
RunConfig parse_config(std::istream& in, const std::string& source = "config");
RunConfig load_config(const std::string& path);
/// Applies one "key=value" override (same rules as a config line).
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Writes every key, so the output re-parses to the same configuration.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace rdsg
