#pragma once

#include <Eigen/Dense>

namespace mss {

// Default scalar: 64-bit. Tests always run at 64-bit; a 32-bit build is
// available behind MSSPLACE_REAL_FLOAT for production use.
#ifdef MSSPLACE_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<Real>;
using Vec = VecX<Real>;

using Index = Eigen::Index;

}  // namespace mss
