#pragma once

#include <complex>

#include <Eigen/Dense>

namespace gridppo {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Complex = std::complex<double>;
using Vec = VectorX<double>;
using Mat = MatrixX<double>;
using CVec = VectorX<Complex>;
using CMat = MatrixX<Complex>;

}  // namespace gridppo
