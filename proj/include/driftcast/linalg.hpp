#pragma once

#include <Eigen/Core>

namespace driftcast {

/// Row-major dense matrix. Batches of activations keep one item per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace driftcast
