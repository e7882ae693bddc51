#pragma once

#include "driftcast/linalg.hpp"

#include <utility>

namespace driftcast::nn {

/// Instance statistics of each row of a lookback batch.
struct RevinState {
    Vector mean;
    Vector stdev;  // sqrt(var + eps)
    double eps = 1e-10;
};

/// Normalizes each row to zero mean and unit (population) std. No affine terms.
[[nodiscard]] std::pair<Matrix, RevinState> revin_normalize(const Matrix& x, double eps = 1e-10);
[[nodiscard]] Matrix revin_denormalize(const Matrix& yhat, const RevinState& state);
/// Chain rule through revin_denormalize with the statistics held fixed.
[[nodiscard]] Matrix revin_denormalize_grad(const Matrix& upstream, const RevinState& state);

}  // namespace driftcast::nn
