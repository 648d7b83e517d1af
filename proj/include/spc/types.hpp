#pragma once

#include <Eigen/Dense>

namespace spc {

using Vec = Eigen::VectorXd;

// Spatial vectors and matrices, runtime-sized for d in {2,3} but with fixed
// capacity so element loops stay allocation-free.
using DVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using DMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

// Element-local quantities. The largest local system is the contact element
// in 3D with d(d+2) = 15 dofs.
using LVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 15, 1>;
using LMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 15, 15>;

// Element node coordinates, (d+1) rows by d columns.
using NodeMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 3>;

} // namespace spc
