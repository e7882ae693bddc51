#pragma once

#include "driftcast/linalg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace driftcast::nn {

enum class ParamKind { Linear, Bias, ConvFilter };

[[nodiscard]] const char* to_string(ParamKind kind) noexcept;
[[nodiscard]] ParamKind param_kind_from_string(const std::string& s);

/**
 * Shape of a parameter tensor.
 *
 *  - Linear(d_in, d_out): row-major d_in x d_out, applied as y = x * W.
 *  - Bias(d_out): d_in is 0.
 *  - ConvFilter(d_in, d_out, d_k): d_k stacked d_in x d_out slices; slice k
 *    multiplies the input delayed by (d_k - 1 - k) steps.
 */
struct ParamShape {
    ParamKind kind = ParamKind::Linear;
    int d_in = 0;
    int d_out = 0;
    int d_k = 1;

    [[nodiscard]] static ParamShape linear(int d_in, int d_out) { return {ParamKind::Linear, d_in, d_out, 1}; }
    [[nodiscard]] static ParamShape bias(int d_out) { return {ParamKind::Bias, 0, d_out, 1}; }
    [[nodiscard]] static ParamShape conv(int d_in, int d_out, int d_k) {
        return {ParamKind::ConvFilter, d_in, d_out, d_k};
    }

    [[nodiscard]] std::int64_t size() const noexcept;

    friend bool operator==(const ParamShape&, const ParamShape&) = default;
};

struct ParamTensor {
    std::string name;
    ParamShape shape;
    int layer_type_id = 0;
    Vector values;
    Vector grad;

    ParamTensor() = default;
    ParamTensor(std::string name, ParamShape shape, int layer_type_id);

    /// Linear weight, or slice k of a conv filter, as a d_in x d_out map.
    [[nodiscard]] Eigen::Map<const Matrix> matrix(int k = 0) const;
    [[nodiscard]] Eigen::Map<Matrix> matrix(int k = 0);
};

/**
 * Ordered list of parameters with a mutation counter.
 *
 * Every mutable access to parameter values bumps the generation, which lets
 * forward caches detect that they were produced from different values.
 */
class ParamStore {
public:
    int add(ParamTensor tensor);

    [[nodiscard]] std::size_t size() const noexcept { return tensors_.size(); }
    [[nodiscard]] const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
    [[nodiscard]] const std::vector<ParamTensor>& tensors() const noexcept { return tensors_; }
    [[nodiscard]] int index_of(const std::string& name) const;

    /// Value access for optimizers and tests; invalidates caches.
    [[nodiscard]] ParamTensor& mutate(std::size_t i);
    /// Gradient accumulator; does not invalidate caches.
    [[nodiscard]] Vector& grad(std::size_t i) { return tensors_[i].grad; }

    void zero_grad();
    void bump() noexcept { ++generation_; }
    [[nodiscard]] std::uint64_t generation() const noexcept { return generation_; }
    [[nodiscard]] std::int64_t parameter_count() const noexcept;

    /// Bit-pattern checksum of every value (FNV-1a over names, shapes and doubles).
    [[nodiscard]] std::uint64_t checksum() const noexcept;

    /// Same names, kinds and shapes in the same order.
    [[nodiscard]] bool same_layout(const ParamStore& other) const noexcept;

private:
    std::vector<ParamTensor> tensors_;
    std::uint64_t generation_ = 0;
};

}  // namespace driftcast::nn
