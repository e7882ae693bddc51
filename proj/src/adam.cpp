#include "driftcast/nn/adam.hpp"

#include <cmath>

namespace driftcast::nn {

Adam::Adam(std::vector<ParamStore*> stores, AdamConfig config)
    : stores_(std::move(stores)), config_(config) {
    for (const auto* store : stores_)
        for (const auto& t : store->tensors()) {
            state_.first_moment.push_back(Vector::Zero(t.values.size()));
            state_.second_moment.push_back(Vector::Zero(t.values.size()));
        }
}

void Adam::step() {
    ++state_.step;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
    std::size_t slot = 0;
    for (auto* store : stores_) {
        for (std::size_t i = 0; i < store->size(); ++i, ++slot) {
            auto& m = state_.first_moment[slot];
            auto& v = state_.second_moment[slot];
            Vector& g = store->grad(i);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
            auto& values = store->mutate(i).values;
            values.array() -= config_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.eps);
            g.setZero();
        }
    }
}

}  // namespace driftcast::nn
