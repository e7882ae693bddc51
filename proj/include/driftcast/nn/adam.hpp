#pragma once

#include "driftcast/linalg.hpp"
#include "driftcast/nn/param.hpp"

#include <cstdint>
#include <vector>

namespace driftcast::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::int64_t step = 0;
};

/// Adam with bias correction over one or more parameter stores. Moments are
/// laid out in store order, then tensor order.
class Adam {
public:
    Adam(std::vector<ParamStore*> stores, AdamConfig config);

    /// Applies one update from the accumulated gradients, then zeroes them.
    void step();

    [[nodiscard]] const AdamState& state() const noexcept { return state_; }
    [[nodiscard]] const AdamConfig& config() const noexcept { return config_; }
    void set_lr(double lr) noexcept { config_.lr = lr; }

private:
    std::vector<ParamStore*> stores_;
    AdamConfig config_;
    AdamState state_;
};

}  // namespace driftcast::nn
