#include "driftcast/nn/loss.hpp"

#include "driftcast/errors.hpp"

namespace driftcast::nn {

namespace {
void check_same(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("loss operands");
}
}  // namespace

double mse(const Matrix& yhat, const Matrix& y) {
    check_same(yhat, y);
    return (yhat - y).squaredNorm() / static_cast<double>(y.rows());
}

double mae(const Matrix& yhat, const Matrix& y) {
    check_same(yhat, y);
    return (yhat - y).cwiseAbs().sum() / static_cast<double>(y.rows());
}

Matrix mse_grad(const Matrix& yhat, const Matrix& y) {
    check_same(yhat, y);
    return (2.0 / static_cast<double>(y.rows())) * (yhat - y);
}

}  // namespace driftcast::nn
