#pragma once

#include "driftcast/adapter.hpp"
#include "driftcast/engine.hpp"
#include "driftcast/seriesdata.hpp"

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace driftcast::cli {

/**
 * Experiment configuration.
 *
 * The file dialect is line based:
 *
 *     # comment
 *     horizon = [4, 8, 16]
 *     [adapter]
 *     concept_dim = 100
 *
 * Values are numbers, true/false, double-quoted strings, or bracketed arrays
 * of values (arrays nest, and must close on the line they open). A [section]
 * header prefixes the keys that follow it, so `[adapter]` then `rank = 32` is
 * the same as `adapter.rank = 32`. `[]` returns to the top level.
 */
struct SyntheticConfig {
    int n_variates = 4;
    std::int64_t n_steps = 6000;
    std::uint64_t seed = 7;
    std::int64_t segment_length = 240;
    std::int64_t jitter = 60;
    std::vector<data::Regime> regimes;  // empty means the built-in three regimes

    friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct ExperimentConfig {
    std::string source = "synthetic";  // synthetic | csv
    std::string path;                  // csv file
    std::string name;                  // dataset label; defaults to "synthetic" or the csv stem
    bool standardize = true;
    data::SplitRatios split;
    SyntheticConfig synthetic;

    models::ModelKind model = models::ModelKind::Mlp;
    int hidden = 64;
    bool revin = false;
    int lookback = 96;
    std::vector<int> horizons{8};
    std::vector<engine::Strategy> strategies{
        {engine::StrategyKind::Frozen, engine::Variant::None},
        {engine::StrategyKind::GdPractical, engine::Variant::None},
        {engine::StrategyKind::GdOptimal, engine::Variant::None},
        {engine::StrategyKind::Proceed, engine::Variant::None},
    };
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::string output_dir = "runs";

    engine::PretrainConfig pretrain;
    engine::AdapterTrainConfig adapter_train;
    adapt::AdapterConfig adapter;
    double online_lr = 0.0;  // 0 means pretrain.lr * 0.1
    bool feedback_through_adapter = true;
    bool trace = false;

    [[nodiscard]] std::string dataset_name() const;
};

[[nodiscard]] bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

/// Throws ParseError(line), UnknownKey(name) or BadValue(key).
[[nodiscard]] ExperimentConfig parse_config(std::istream& in);
[[nodiscard]] ExperimentConfig parse_config_text(const std::string& text);
/// Throws MissingFile when the path does not exist.
[[nodiscard]] ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Canonical text form; parse_config_text(serialize_config(c)) reproduces c.
[[nodiscard]] std::string serialize_config(const ExperimentConfig& cfg);

/// All keys the parser accepts, dotted.
[[nodiscard]] std::vector<std::string> config_keys();

[[nodiscard]] data::SyntheticSpec synthetic_spec(const ExperimentConfig& cfg);
/// Loads (or generates) the series, splits it and standardizes on the training segment.
[[nodiscard]] engine::PreparedData load_data(const ExperimentConfig& cfg);
[[nodiscard]] engine::CellConfig cell_config(const ExperimentConfig& cfg, int horizon, const engine::Strategy& strategy,
                                             std::uint64_t seed);

/// `{dataset}_{model}_{strategy}_{variant}_H{H}_seed{s}`
[[nodiscard]] std::string cell_stem(const std::string& dataset, const std::string& model, const std::string& strategy,
                                    const std::string& variant, int horizon, std::uint64_t seed);

/// Shortest text that parses back to the same double.
[[nodiscard]] std::string format_double(double v);

}  // namespace driftcast::cli
