#pragma once

#include <Eigen/Dense>

namespace edlab {

using Real = double;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace edlab
