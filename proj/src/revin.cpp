#include "driftcast/nn/revin.hpp"

namespace driftcast::nn {

std::pair<Matrix, RevinState> revin_normalize(const Matrix& x, double eps) {
    RevinState st;
    st.eps = eps;
    st.mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - st.mean;
    st.stdev = (centered.array().square().rowwise().mean() + eps).sqrt();
    Matrix out = centered.array().colwise() / st.stdev.array();
    return {std::move(out), std::move(st)};
}

Matrix revin_denormalize(const Matrix& yhat, const RevinState& state) {
    Matrix out = yhat.array().colwise() * state.stdev.array();
    out.colwise() += state.mean;
    return out;
}

Matrix revin_denormalize_grad(const Matrix& upstream, const RevinState& state) {
    return upstream.array().colwise() * state.stdev.array();
}

}  // namespace driftcast::nn
