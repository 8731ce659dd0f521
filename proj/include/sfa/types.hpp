#pragma once
#include <cstddef>
#include <vector>
#include <Eigen/Core>

namespace sfa {

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar_, Rows_, Cols_>;

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar_, Rows_, 1>;

using Index = Eigen::Index;
using MatrixXd = mat_type<double>;
using VectorXd = vec_type<double>;

// Sorted, duplicate-free column indices into the selectable block.
using Support = std::vector<Index>;

} // namespace sfa
