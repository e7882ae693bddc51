#pragma once

#include "driftcast/linalg.hpp"

namespace driftcast::nn {

// Per-sample errors over an N x H forecast. Both divide by N only (not by H):
// a sample's MSE is the squared Frobenius norm of the error over N.

[[nodiscard]] double mse(const Matrix& yhat, const Matrix& y);
[[nodiscard]] double mae(const Matrix& yhat, const Matrix& y);

/// d mse / d yhat.
[[nodiscard]] Matrix mse_grad(const Matrix& yhat, const Matrix& y);

}  // namespace driftcast::nn
