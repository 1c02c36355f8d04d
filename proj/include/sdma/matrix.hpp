#pragma once

#include <Eigen/Dense>

namespace sdma {

/// Sample-major storage: row j is one point, contiguous in memory.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace sdma
