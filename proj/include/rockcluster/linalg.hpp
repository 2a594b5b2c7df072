#pragma once

#include <Eigen/Dense>

namespace rockcluster {

// Sample matrices are row-major: one row per sample, so distance loops over
// row pairs touch contiguous memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace rockcluster
