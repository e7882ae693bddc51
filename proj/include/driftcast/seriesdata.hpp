#pragma once

#include "driftcast/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace driftcast::data {

/**
 * N-variate observation matrix.
 *
 * Storage is 0-based (column j holds time step j+1) but every public accessor
 * takes 1-based time indices: step(t) is v_t, and a window with origin t ends
 * at v_t. This is the only place where the two conventions meet.
 */
class SeriesFrame {
public:
    SeriesFrame() = default;
    SeriesFrame(Matrix values, std::vector<std::string> variate_names, std::string frequency = {});

    [[nodiscard]] std::int64_t n_variates() const noexcept { return values_.rows(); }
    [[nodiscard]] std::int64_t n_steps() const noexcept { return values_.cols(); }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& variate_names() const noexcept { return names_; }
    [[nodiscard]] const std::string& frequency() const noexcept { return frequency_; }

    /// v_t, 1 <= t <= T.
    [[nodiscard]] Vector step(std::int64_t t) const;
    /// Columns t0..t1 inclusive (1-based), as an N x (t1-t0+1) block.
    [[nodiscard]] Matrix steps(std::int64_t t0, std::int64_t t1) const;
    /// Restrict to steps t0..t1 inclusive.
    [[nodiscard]] SeriesFrame slice(std::int64_t t0, std::int64_t t1) const;

    friend bool operator==(const SeriesFrame&, const SeriesFrame&) = default;

private:
    Matrix values_;
    std::vector<std::string> names_;
    std::string frequency_;
};

struct WindowSample {
    Matrix x;  // N x L, v_{t-L+1} .. v_t
    Matrix y;  // N x H, v_{t+1} .. v_{t+H}
    std::int64_t origin = 0;
};

struct SplitIndices {
    std::int64_t train_end = 0;
    std::int64_t valid_end = 0;
    std::int64_t test_end = 0;

    friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

struct SplitRatios {
    double train = 20.0;
    double valid = 5.0;
    double test = 75.0;

    friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct StandardizeStats {
    Vector mean;
    Vector stdev;
    std::vector<bool> clamped;  // variate had zero spread over the stats range

    [[nodiscard]] SeriesFrame invert(const SeriesFrame& standardized) const;
};

/// Regime of the synthetic generator: AR(2) residual plus a sinusoid around a level.
struct Regime {
    double ar1 = 0.0;
    double ar2 = 0.0;
    double amplitude = 1.0;
    double period = 24.0;
    double noise = 0.1;
    double level = 0.0;

    friend bool operator==(const Regime&, const Regime&) = default;
};

struct ScheduleEntry {
    std::int64_t start = 1;  // 1-based first step of this segment
    int regime = 0;

    friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

struct SyntheticSpec {
    int n_variates = 4;
    std::int64_t n_steps = 6000;
    std::vector<Regime> regimes;
    std::vector<ScheduleEntry> schedule;
    std::uint64_t seed = 0;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticSeries {
    SeriesFrame frame;
    std::vector<int> labels;  // labels[t-1] is the regime of step t
};

[[nodiscard]] SeriesFrame load_csv(const std::filesystem::path& path);

[[nodiscard]] SplitIndices chronological_split(const SeriesFrame& frame, const SplitRatios& ratios);
[[nodiscard]] SplitIndices chronological_split(std::int64_t n_steps, const SplitRatios& ratios);

/// One sample per origin in [max(lo, L), min(hi, T-H)], ascending.
[[nodiscard]] std::vector<WindowSample> make_windows(const SeriesFrame& frame, int lookback,
                                                     int horizon, std::int64_t lo, std::int64_t hi);
[[nodiscard]] WindowSample window_at(const SeriesFrame& frame, int lookback, int horizon,
                                     std::int64_t origin);

/// Per-variate z-score with population std over steps [lo, hi].
[[nodiscard]] std::pair<SeriesFrame, StandardizeStats> standardize(const SeriesFrame& frame,
                                                                   std::int64_t lo,
                                                                   std::int64_t hi);

/// Throws BadSchedule when the schedule is not a gapless cover of [1, n_steps]
/// with at least two recurring regimes.
void validate_spec(const SyntheticSpec& spec);
[[nodiscard]] SyntheticSeries generate_synthetic(const SyntheticSpec& spec);

/// Cycles through regimes 0..R-1 with segment lengths jittered by up to
/// +-jitter steps around segment_length.
[[nodiscard]] std::vector<ScheduleEntry> recurring_schedule(std::int64_t n_steps, int n_regimes,
                                                            std::int64_t segment_length,
                                                            std::int64_t jitter,
                                                            std::uint64_t seed);

/// The three-regime dataset used by the trend and ablation experiments.
[[nodiscard]] SyntheticSpec default_synthetic_spec(std::uint64_t seed = 7);

/**
 * Read-only view of a frame for the online phase.
 *
 * Reads beyond the clock are rejected with LeakageViolation unless the view
 * is in oracle mode, in which case they succeed and each future step read is
 * counted in the audit.
 */
class GuardedStream {
public:
    GuardedStream(const SeriesFrame& frame, std::int64_t clock, bool oracle_mode);

    [[nodiscard]] std::int64_t clock() const noexcept { return clock_; }
    [[nodiscard]] bool oracle_mode() const noexcept { return oracle_mode_; }
    [[nodiscard]] const SeriesFrame& frame() const noexcept { return *frame_; }
    [[nodiscard]] std::int64_t oracle_reads() const noexcept { return oracle_reads_; }
    [[nodiscard]] std::int64_t n_steps() const noexcept { return frame_->n_steps(); }

    void advance_to(std::int64_t clock);

    [[nodiscard]] Vector read(std::int64_t t);
    [[nodiscard]] Matrix read_range(std::int64_t t0, std::int64_t t1);
    [[nodiscard]] WindowSample sample(std::int64_t origin, int lookback, int horizon);
    [[nodiscard]] Matrix lookback(std::int64_t origin, int lookback);

private:
    void check(std::int64_t t0, std::int64_t t1);

    const SeriesFrame* frame_;
    std::int64_t clock_;
    bool oracle_mode_;
    std::int64_t oracle_reads_ = 0;
};

[[nodiscard]] GuardedStream guarded_view(const SeriesFrame& frame, std::int64_t clock,
                                         bool oracle_mode);

}  // namespace driftcast::data
