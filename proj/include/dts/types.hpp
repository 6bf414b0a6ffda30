#pragma once

#include <Eigen/Core>

namespace dts {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVectorX = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Real = double;
using Mat = MatrixX<Real>;
using Vec = VectorX<Real>;
using RowVec = RowVectorX<Real>;
using Index = Eigen::Index;

}  // namespace dts
