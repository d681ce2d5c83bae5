// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace depscreen {

// Row = one frame / one time step.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace depscreen
