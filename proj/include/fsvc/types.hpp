#pragma once

#include <Eigen/Core>

namespace fsvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace fsvc
