#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "rdsg/mesh.hpp"
#include "rdsg/tensor_train.hpp"
#include "rdsg/validate.hpp"

namespace testing {

inline std::shared_ptr<const rdsg::TriMesh> shared(rdsg::TriMesh m)
{
    return std::make_shared<const rdsg::TriMesh>(std::move(m));
}

/// Unit square split along the diagonal (0,0)-(1,1).
inline rdsg::TriMesh square_two_cells()
{
    return rdsg::TriMesh({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{{0, 1, 2}}, {{0, 2, 3}}});
}

inline rdsg::TriMesh unit_triangle() { return rdsg::TriMesh({{0, 0}, {1, 0}, {0, 1}}, {{{0, 1, 2}}}); }

/// Square with a center vertex: four cells, one interior dof.
inline rdsg::TriMesh square_four_cells()
{
    return rdsg::TriMesh({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}},
                         {{{0, 1, 4}}, {{1, 2, 4}}, {{2, 3, 4}}, {{3, 0, 4}}});
}

inline double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing
