#pragma once

#include "driftcast/linalg.hpp"
#include "driftcast/nn/param.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace driftcast::nn {

struct LinearOp {
    int param;
    friend bool operator==(const LinearOp&, const LinearOp&) = default;
};
struct BiasOp {
    int param;
    friend bool operator==(const BiasOp&, const BiasOp&) = default;
};
/// Causal 1-D convolution over a row laid out time-major: feature s*d_in + c.
struct Conv1dOp {
    int param;
    int length;
    friend bool operator==(const Conv1dOp&, const Conv1dOp&) = default;
};
struct GeluOp {
    friend bool operator==(const GeluOp&, const GeluOp&) = default;
};

using LayerOp = std::variant<LinearOp, BiasOp, Conv1dOp, GeluOp>;

struct Wiring {
    int input_dim = 0;
    std::vector<LayerOp> ops;

    friend bool operator==(const Wiring&, const Wiring&) = default;
};

/// Per-row rescaling of one parameter: the layer sees input x*alpha and its
/// contribution is scaled by beta. Bias parameters ignore alpha.
struct LayerModulation {
    bool active = false;
    Matrix alpha;  // rows x d_in
    Matrix beta;   // rows x d_out
};

/// Indexed by parameter position in the network's store.
using Modulation = std::vector<LayerModulation>;

class Network {
public:
    Network();
    Network(ParamStore params, Wiring wiring);
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    [[nodiscard]] const ParamStore& params() const noexcept { return params_; }
    [[nodiscard]] ParamStore& params() noexcept { return params_; }
    [[nodiscard]] const Wiring& wiring() const noexcept { return wiring_; }
    [[nodiscard]] int input_dim() const noexcept { return wiring_.input_dim; }
    [[nodiscard]] int output_dim() const noexcept { return output_dim_; }
    [[nodiscard]] std::uint64_t id() const noexcept { return id_; }

private:
    void validate();

    ParamStore params_;
    Wiring wiring_;
    int output_dim_ = 0;
    std::uint64_t id_;
};

struct ForwardCache {
    std::uint64_t network_id = 0;
    std::uint64_t generation = 0;
    std::vector<Matrix> inputs;  // input of each op
    Matrix output;
    Modulation modulation;
};

/// Runs every op of the wiring over the rows of x.
[[nodiscard]] ForwardCache forward(const Network& net, const Matrix& x,
                                   const Modulation* modulation = nullptr);

/// Accumulates parameter gradients into net.params().grad(i) and returns
/// d loss / d x. When dmod is given, it receives d loss / d alpha and
/// d loss / d beta for every modulated parameter.
Matrix backward(Network& net, const ForwardCache& cache, const Matrix& upstream,
                Modulation* dmod = nullptr);

/// GeLU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
[[nodiscard]] double gelu(double x) noexcept;
[[nodiscard]] double gelu_grad(double x) noexcept;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights; biases are zeroed.
void init_default(ParamTensor& tensor, std::mt19937_64& rng);

}  // namespace driftcast::nn
