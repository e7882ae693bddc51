#pragma once

#include "driftcast/config.hpp"
#include "driftcast/engine.hpp"
#include "driftcast/nn/checkpoint.hpp"

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace driftcast::cli {

/// 0 success, 2 config error, 3 data error, 4 numeric divergence, 1 anything else.
[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

/// Output layout under the run directory.
struct OutputLayout {
    std::filesystem::path root;

    [[nodiscard]] std::filesystem::path reports() const { return root / "reports"; }
    [[nodiscard]] std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    [[nodiscard]] std::filesystem::path traces() const { return root / "traces"; }
    [[nodiscard]] std::filesystem::path summary() const { return root / "summary.csv"; }
    [[nodiscard]] std::filesystem::path manifest() const { return root / "manifest.json"; }
};

/// Fills delta_mse / delta_mae of every report that has a gd_optimal partner
/// with the same dataset, model, L, H and seed (the partner itself gets none).
void apply_deltas(std::vector<engine::RunReport>& reports);

/// One row per report: dataset,model,strategy,variant,H,seed,mse,mae,delta_mse,delta_mae.
/// Numbers use the shortest round-trip form, so they equal the report files exactly.
[[nodiscard]] std::string summary_csv(const std::vector<engine::RunReport>& reports);
[[nodiscard]] std::string summary_table(const std::vector<engine::RunReport>& reports);

/// Model checkpoint, plus adapter sections when an adapter is given.
[[nodiscard]] nn::Checkpoint cell_checkpoint(const models::ForecastModel& model, const adapt::DriftAdapter* adapter);

struct RunOutcome {
    std::vector<engine::RunReport> reports;  // completed cells, in config order
    std::vector<std::string> failed;         // stems of incomplete cells
    int exit_code = 0;
};

/// Every (H, strategy, seed) cell. Cells sharing (H, seed) share one
/// pretrained model and run on one worker; up to `jobs` workers run at once.
RunOutcome cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int jobs, std::ostream& log);

/// Pretrains one model per (H, seed) and saves it.
void cmd_pretrain(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Trains an adapter for every adapter strategy, reusing pretrained checkpoints when present.
void cmd_train_adapter(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Writes the configured synthetic series and its regime labels as CSV.
void cmd_synth_gen(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Writes t,kind,values rows for every online step; returns the number of rows.
/// Throws MissingCheckpoint.
std::size_t cmd_export_drift(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& out_csv);

/// Rebuilds the summary from the report files in out_dir.
std::vector<engine::RunReport> cmd_report(const std::filesystem::path& out_dir, std::ostream& log);

/// Command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace driftcast::cli
