#pragma once

#include <Eigen/Dense>

namespace fsh {

/// Row-per-observation dense matrix.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace fsh
