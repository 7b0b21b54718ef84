#pragma once

#include <Eigen/Dense>

namespace cpgts {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace cpgts
