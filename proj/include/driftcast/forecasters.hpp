#pragma once

#include "driftcast/linalg.hpp"
#include "driftcast/nn/checkpoint.hpp"
#include "driftcast/nn/network.hpp"
#include "driftcast/nn/revin.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftcast::models {

/// Parameters grouped by (kind, d_in, d_out, d_k). Members of one entry are
/// interchangeable as far as the adapter generator is concerned.
struct LayerTypeEntry {
    int id = 0;
    nn::ParamShape shape;
    std::vector<int> members;  // parameter indices, ascending
};

class LayerTypeRegistry {
public:
    LayerTypeRegistry() = default;

    /// Reads the layer_type_id tags of the store. Throws RegistryMismatch when
    /// ids are not dense or one id mixes shapes.
    [[nodiscard]] static LayerTypeRegistry from_store(const nn::ParamStore& store);

    [[nodiscard]] const std::vector<LayerTypeEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t n_types() const noexcept { return entries_.size(); }
    /// Number of adaptable parameters (layers).
    [[nodiscard]] std::size_t n_layers() const noexcept { return type_of_.size(); }
    [[nodiscard]] int type_of(int param) const { return type_of_.at(static_cast<std::size_t>(param)); }
    [[nodiscard]] const LayerTypeEntry& entry(int type_id) const { return entries_.at(static_cast<std::size_t>(type_id)); }

    friend bool operator==(const LayerTypeRegistry& a, const LayerTypeRegistry& b) {
        return a.type_of_ == b.type_of_;
    }

private:
    std::vector<LayerTypeEntry> entries_;
    std::vector<int> type_of_;
};

/// Assigns layer_type_id tags by grouping equal shapes in order of first appearance.
void assign_layer_types(nn::ParamStore& store);

enum class ModelKind { Linear, Mlp, Custom };

[[nodiscard]] const char* to_string(ModelKind kind) noexcept;

struct ModelDims {
    int n_variates = 1;
    int lookback = 1;
    int horizon = 1;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/**
 * Direct multi-step forecaster with variate-shared weights.
 *
 * Each variate's lookback row (length L) goes through the same network and
 * yields its H-step forecast, so one forward call produces the whole N x H
 * prediction. With RevIN enabled the network sees instance-normalized rows.
 */
class ForecastModel {
public:
    ForecastModel(nn::Network net, ModelDims dims, bool revin, ModelKind kind, int hidden = 0);

    [[nodiscard]] const nn::Network& network() const noexcept { return net_; }
    [[nodiscard]] nn::Network& network() noexcept { return net_; }
    [[nodiscard]] const nn::ParamStore& params() const noexcept { return net_.params(); }
    [[nodiscard]] nn::ParamStore& params() noexcept { return net_.params(); }
    [[nodiscard]] const ModelDims& dims() const noexcept { return dims_; }
    [[nodiscard]] bool revin() const noexcept { return revin_; }
    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] int hidden() const noexcept { return hidden_; }
    [[nodiscard]] const LayerTypeRegistry& registry() const noexcept { return registry_; }
    [[nodiscard]] std::int64_t parameter_count() const noexcept { return net_.params().parameter_count(); }

    /// N x L -> N x H.
    [[nodiscard]] Matrix forecast(const Matrix& x) const;

private:
    nn::Network net_;
    ModelDims dims_;
    bool revin_;
    ModelKind kind_;
    int hidden_;
    LayerTypeRegistry registry_;
};

[[nodiscard]] ForecastModel build_linear(int n_variates, int lookback, int horizon, bool revin,
                                         std::uint64_t seed = 0);
[[nodiscard]] ForecastModel build_mlp(int n_variates, int lookback, int horizon, int hidden,
                                      bool revin, std::uint64_t seed = 0);

/// Result of forwarding a batch of B lookback matrices stacked as B*N rows.
struct BatchForward {
    Matrix output;  // B*N x H, denormalized when RevIN is on
    nn::ForwardCache cache;
    std::optional<nn::RevinState> revin;
    std::size_t batch = 0;

    [[nodiscard]] Matrix item(std::size_t j, int n_variates) const {
        return output.middleRows(static_cast<Eigen::Index>(j) * n_variates, n_variates);
    }
};

[[nodiscard]] Matrix stack_rows(std::span<const Matrix> items);

[[nodiscard]] BatchForward forward_batch(const ForecastModel& model, std::span<const Matrix> xs,
                                         const nn::Modulation* modulation = nullptr);
/// Accumulates parameter gradients for d loss / d output.
void backward_batch(ForecastModel& model, const BatchForward& fwd, const Matrix& d_output,
                    nn::Modulation* dmod = nullptr);

using ParamSnapshot = nn::ParamStore;

[[nodiscard]] ParamSnapshot clone_params(const ForecastModel& model);
/// Throws WiringMismatch when the snapshot comes from a different layout.
void restore_params(ForecastModel& model, const ParamSnapshot& snapshot);

[[nodiscard]] std::string encode_wiring(const nn::Wiring& wiring);
[[nodiscard]] nn::Wiring decode_wiring(const std::string& text);

[[nodiscard]] nn::CheckpointSection to_checkpoint(const ForecastModel& model);
[[nodiscard]] ForecastModel from_checkpoint(const nn::CheckpointSection& section);

}  // namespace driftcast::models
