#pragma once

#include <Eigen/Core>

namespace flowmarket {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace flowmarket
