#pragma once

#include "driftcast/adapter.hpp"
#include "driftcast/forecasters.hpp"
#include "driftcast/seriesdata.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftcast::engine {

enum class StrategyKind { Frozen, GdPractical, GdOptimal, Proceed };
enum class Variant { None, FeedbackOnly, ConceptOnly, SharedEncoder, UnsharedW1W2 };

struct Strategy {
    StrategyKind kind = StrategyKind::Frozen;
    Variant variant = Variant::None;

    /// Accepts the config tokens frozen, gd_practical, gd_optimal, proceed,
    /// feedback_only, concept_only, shared_encoder and unshared_w1w2. The last
    /// four are Proceed variants. Throws BadValue("strategy") otherwise.
    [[nodiscard]] static Strategy parse(const std::string& token);
    [[nodiscard]] std::string token() const;
    /// Report fields.
    [[nodiscard]] std::string strategy_name() const;
    [[nodiscard]] std::string variant_name() const;

    /// True when the run needs a trained adapter (feedback_only does not).
    [[nodiscard]] bool uses_adapter() const noexcept;
    [[nodiscard]] bool oracle() const noexcept { return kind == StrategyKind::GdOptimal; }
    /// Adapter layout required by the variant.
    [[nodiscard]] adapt::AdapterConfig adapter_config(adapt::AdapterConfig base) const;

    friend bool operator==(const Strategy&, const Strategy&) = default;
};

[[nodiscard]] std::vector<std::string> strategy_tokens();

// ---- offline phases ----------------------------------------------------------

struct PretrainConfig {
    double lr = 3e-4;
    int epochs = 60;
    int batch = 32;
    int patience = 5;  // epochs without validation improvement; 0 disables
    std::uint64_t seed = 0;
};

struct PretrainRecord {
    int best_epoch = -1;  // -1 when no epoch ran
    double best_valid_mse = 0.0;
    std::vector<double> train_mse;
    std::vector<double> valid_mse;
};

/// Mean per-sample MSE of plain forecasts.
[[nodiscard]] double evaluate_mse(const models::ForecastModel& model, std::span<const data::WindowSample> windows);

/// Adam on shuffled mini-batches; keeps the parameters of the epoch with the
/// lowest validation MSE. Throws Diverged on a non-finite loss.
PretrainRecord pretrain(models::ForecastModel& model, std::span<const data::WindowSample> train,
                        std::span<const data::WindowSample> valid, const PretrainConfig& cfg);

struct AdapterTrainConfig {
    double lr = 1e-3;
    int epochs = 40;
    int batch = 32;
    std::uint64_t seed = 0;
};

struct AdapterTrainRecord {
    std::vector<double> train_mse;
    std::vector<double> valid_mse;
};

/// Mean joint loss over `windows` split into consecutive batches of the given
/// size, each using the previous batch as drift reference.
[[nodiscard]] double evaluate_adapted(const models::ForecastModel& model, const adapt::DriftAdapter& adapter,
                                      std::span<const data::WindowSample> windows, int batch);

/// Joint training of the model and the adapter on shuffled batches, each batch
/// using the previous batch's concept as the reference (zero drift for the
/// first batch of an epoch), for a fixed number of epochs. Validation loss is
/// recorded per epoch but not used for selection. Throws Diverged.
AdapterTrainRecord train_adapter(models::ForecastModel& model, adapt::DriftAdapter& adapter,
                                 std::span<const data::WindowSample> train,
                                 std::span<const data::WindowSample> valid, const AdapterTrainConfig& cfg);

// ---- online phase ------------------------------------------------------------

struct OnlineConfig {
    Strategy strategy;
    int lookback = 96;
    int horizon = 8;
    double online_lr = 3e-5;
    bool feedback_through_adapter = true;
    /// Online time steps [begin, end]; at step t the clock reads t and the
    /// forecast is made for origin t. Origins >= eval_begin are scored.
    std::int64_t begin = 0;
    std::int64_t eval_begin = 0;
    std::int64_t end = 0;
    bool record_trace = false;
};

/// Test hooks. on_feedback sees (t, origin of the feedback sample);
/// on_forecast sees (t, model checksum before, model checksum after).
struct OnlineObserver {
    std::function<void(std::int64_t, std::int64_t)> on_feedback;
    std::function<void(std::int64_t, std::uint64_t, std::uint64_t)> on_forecast;
};

struct LeakageAudit {
    std::int64_t violations = 0;
    std::int64_t oracle_reads = 0;

    friend bool operator==(const LeakageAudit&, const LeakageAudit&) = default;
};

struct TracePoint {
    std::int64_t t = 0;
    double loss = 0.0;

    friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct OnlineResult {
    double mse = 0.0;
    double mae = 0.0;
    std::int64_t n_scored = 0;
    LeakageAudit audit;
    std::vector<TracePoint> trace;
    std::uint64_t adapter_checksum_before = 0;
    std::uint64_t adapter_checksum_after = 0;
};

/// Online steps from cfg.begin to cfg.end through a guarded stream (oracle mode
/// only for GdOptimal). Each step runs the feedback update on the delayed
/// sample, then forecasts origin t; forecasts are scored once their horizon
/// has been observed. The adapter is never modified.
/// Throws StrategyArgMismatch when `adapter` is given iff the strategy needs none.
OnlineResult run_online(models::ForecastModel& model, const adapt::DriftAdapter* adapter,
                        const data::SeriesFrame& frame, const OnlineConfig& cfg,
                        const OnlineObserver* observer = nullptr);

/// Per-step concept export for offline inspection.
struct DriftRow {
    std::int64_t t = 0;
    std::string kind;  // concept_train, concept_test, drift
    Vector values;
};

/// For each online step t: the reference training concept, the test concept
/// of X_t, and their difference, as seen by the forecast step.
[[nodiscard]] std::vector<DriftRow> export_drift(const adapt::DriftAdapter& adapter, const data::SeriesFrame& frame,
                                                 int lookback, int horizon, std::int64_t begin, std::int64_t end);

// ---- reports -----------------------------------------------------------------

struct RunReport {
    std::string dataset;
    std::string model;
    std::string strategy;
    std::string variant;
    int lookback = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
    double mse = 0.0;
    double mae = 0.0;
    std::int64_t n_scored = 0;
    std::optional<double> delta_mse;
    std::optional<double> delta_mae;
    LeakageAudit leakage_audit;
    std::int64_t adapter_param_count = 0;
    std::int64_t naive_param_count = 0;
    std::int64_t encoder_param_count = 0;
    nlohmann::ordered_json config;
    std::vector<TracePoint> trace;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    [[nodiscard]] static RunReport from_json(const nlohmann::ordered_json& j);
};

struct Gap {
    double mse = 0.0;
    double mae = 0.0;
};

/// (p - o) / o * 100. Throws ZeroDenominator when o == 0.
[[nodiscard]] double gap_percent(double practical, double optimal);

/// Throws ConfigMismatch unless dataset, model, lookback, horizon and seed agree.
[[nodiscard]] Gap compute_gap(const RunReport& practical, const RunReport& optimal);

// ---- one experiment cell -------------------------------------------------------

struct ModelChoice {
    models::ModelKind kind = models::ModelKind::Mlp;
    int hidden = 64;
    bool revin = false;
};

struct CellConfig {
    std::string dataset = "synthetic";
    ModelChoice model;
    int lookback = 96;
    int horizon = 8;
    Strategy strategy;
    std::uint64_t seed = 0;
    PretrainConfig pretrain;
    AdapterTrainConfig adapter_train;
    adapt::AdapterConfig adapter;
    double online_lr = 0.0;  // 0 means pretrain.lr * 0.1
    bool feedback_through_adapter = true;
    bool record_trace = false;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// A standardized frame with its split boundaries.
struct PreparedData {
    data::SeriesFrame frame;
    data::SplitIndices split;
};

[[nodiscard]] PreparedData prepare(const data::SeriesFrame& raw, const data::SplitRatios& ratios, bool standardize);

struct WindowSets {
    std::vector<data::WindowSample> train;
    std::vector<data::WindowSample> valid;
};

/// Training windows have labels inside the training segment; validation
/// windows have labels inside the validation segment.
[[nodiscard]] WindowSets offline_windows(const PreparedData& data, int lookback, int horizon);

/// The online range: begin = train_end + 1, eval_begin = valid_end, end = T - H.
[[nodiscard]] OnlineConfig online_range(const PreparedData& data, const CellConfig& cell);

[[nodiscard]] models::ForecastModel build_model(const ModelChoice& choice, int n_variates, int lookback,
                                                int horizon, std::uint64_t seed);

/// Outputs of the offline phases for one (model, H, seed).
struct TrainedModels {
    std::optional<models::ForecastModel> pretrained;
    PretrainRecord pretrain_record;
};

/// Builds and pretrains the cell's model.
[[nodiscard]] TrainedModels pretrain_cell(const PreparedData& data, const CellConfig& cell);

/// Model (and adapter, for adapter strategies) ready for the online phase.
struct TrainedCell {
    models::ForecastModel model;
    std::optional<adapt::DriftAdapter> adapter;
    AdapterTrainRecord adapter_record;
};

/// Copies `pretrained` (or pretrains a fresh model) and trains the adapter
/// when the strategy uses one.
[[nodiscard]] TrainedCell train_cell(const PreparedData& data, const CellConfig& cell,
                                     const models::ForecastModel* pretrained = nullptr);

/// Online phase and report for a trained cell. The cell's model is updated in place.
[[nodiscard]] RunReport evaluate_cell(const PreparedData& data, const CellConfig& cell, TrainedCell& trained);

/// Full pipeline for one cell. `pretrained` may carry a model from pretrain_cell
/// for the same dataset, model, H and seed; it is copied, never modified.
[[nodiscard]] RunReport run_cell(const PreparedData& data, const CellConfig& cell,
                                 const models::ForecastModel* pretrained = nullptr);

/// Proceed ablation run; same as run_cell with the strategy set to the variant.
[[nodiscard]] RunReport run_variant(Variant variant, const PreparedData& data, CellConfig cell,
                                    const models::ForecastModel* pretrained = nullptr);

}  // namespace driftcast::engine
