#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rdsg/mesh.hpp"

namespace rdsg {

struct ValidationCheck {
    std::string name;
    double error = 0.0;  ///< relative deviation from the dense reference
    double tol = 0.0;
    bool pass() const { return error <= tol; }
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    double seconds = 0.0;
    bool all_pass() const;
};

/// Eight-cell hexagon with two interior vertices (two P1 dofs).
std::shared_ptr<const TriMesh> hexagon_mesh();

/// TT operator, right-hand side, ALS solution at full rank and every estimator part
/// against dense Kronecker assembly with tensor Gauss quadrature, on two M = 2 instances.
ValidationReport run_oracle_suite(std::uint64_t seed = 1, double tol = 1e-8);

}  // namespace rdsg
