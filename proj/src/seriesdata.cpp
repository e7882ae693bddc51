#include "driftcast/seriesdata.hpp"

#include "driftcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace driftcast::data {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_finite(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

bool is_timestamp_name(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "date" || lower == "timestamp" || lower == "time" || lower == "datetime";
}

}  // namespace

SeriesFrame::SeriesFrame(Matrix values, std::vector<std::string> variate_names,
                         std::string frequency)
    : values_(std::move(values)), names_(std::move(variate_names)),
      frequency_(std::move(frequency)) {
    if (values_.rows() < 1 || values_.cols() < 1) throw EmptyData();
    if (static_cast<std::int64_t>(names_.size()) != values_.rows())
        throw DimMismatch("variate_names has " + std::to_string(names_.size()) + " entries for " +
                          std::to_string(values_.rows()) + " variates");
    const std::set<std::string> unique(names_.begin(), names_.end());
    if (unique.size() != names_.size()) throw DimMismatch("variate names are not distinct");
    if (!values_.allFinite()) throw DimMismatch("frame contains non-finite values");
}

Vector SeriesFrame::step(std::int64_t t) const {
    if (t < 1 || t > n_steps()) throw DimMismatch("step " + std::to_string(t) + " out of range");
    return values_.col(t - 1);
}

Matrix SeriesFrame::steps(std::int64_t t0, std::int64_t t1) const {
    if (t0 < 1 || t1 > n_steps() || t0 > t1)
        throw DimMismatch("steps [" + std::to_string(t0) + ", " + std::to_string(t1) +
                          "] out of range");
    return values_.middleCols(t0 - 1, t1 - t0 + 1);
}

SeriesFrame SeriesFrame::slice(std::int64_t t0, std::int64_t t1) const {
    return SeriesFrame(steps(t0, t1), names_, frequency_);
}

SeriesFrame StandardizeStats::invert(const SeriesFrame& standardized) const {
    Matrix v = standardized.values();
    for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) = v.row(i).array() * stdev(i) + mean(i);
    return SeriesFrame(std::move(v), standardized.variate_names(), standardized.frequency());
}

SeriesFrame load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path.string());

    std::string line;
    if (!std::getline(in, line)) throw EmptyData();
    std::vector<std::string> header;
    for (const auto cell : split_commas(line)) header.emplace_back(cell);

    std::vector<std::vector<std::string>> raw;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        raw.emplace_back(cells.begin(), cells.end());
    }
    if (raw.empty()) throw EmptyData();

    double probe = 0.0;
    const bool skip_first =
        is_timestamp_name(header.front()) || !parse_finite(raw.front().front(), probe);
    const std::size_t first_col = skip_first ? 1 : 0;
    if (header.size() <= first_col) throw EmptyData();
    const std::size_t n = header.size() - first_col;

    Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(raw.size()));
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (raw[r].size() != header.size()) throw RaggedRows(r + 1);
        for (std::size_t c = first_col; c < header.size(); ++c) {
            double v = 0.0;
            if (!parse_finite(raw[r][c], v)) throw NonNumericCell(r + 1, c + 1);
            values(static_cast<Eigen::Index>(c - first_col), static_cast<Eigen::Index>(r)) = v;
        }
    }

    std::vector<std::string> names;
    for (std::size_t c = first_col; c < header.size(); ++c) names.push_back(header[c]);
    return SeriesFrame(std::move(values), std::move(names), {});
}

SplitIndices chronological_split(std::int64_t n_steps, const SplitRatios& ratios) {
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0)
        throw DegenerateSplit("negative ratio");
    const double total = ratios.train + ratios.valid + ratios.test;
    if (!(total > 0)) throw DegenerateSplit("ratios sum to zero");
    const auto t = static_cast<double>(n_steps);
    SplitIndices s;
    s.train_end = static_cast<std::int64_t>(std::floor(t * ratios.train / total));
    s.valid_end = static_cast<std::int64_t>(std::floor(t * (ratios.train + ratios.valid) / total));
    s.test_end = n_steps;
    if (s.train_end <= 0) throw DegenerateSplit("empty training segment");
    if (s.valid_end <= s.train_end) throw DegenerateSplit("empty validation segment");
    if (s.test_end <= s.valid_end) throw DegenerateSplit("empty test segment");
    return s;
}

SplitIndices chronological_split(const SeriesFrame& frame, const SplitRatios& ratios) {
    return chronological_split(frame.n_steps(), ratios);
}

WindowSample window_at(const SeriesFrame& frame, int lookback, int horizon, std::int64_t origin) {
    WindowSample w;
    w.origin = origin;
    w.x = frame.steps(origin - lookback + 1, origin);
    w.y = frame.steps(origin + 1, origin + horizon);
    return w;
}

std::vector<WindowSample> make_windows(const SeriesFrame& frame, int lookback, int horizon,
                                       std::int64_t lo, std::int64_t hi) {
    if (lookback < 1 || horizon < 1) throw EmptyRange();
    const std::int64_t first = std::max<std::int64_t>(lo, lookback);
    const std::int64_t last = std::min<std::int64_t>(hi, frame.n_steps() - horizon);
    if (first > last) throw EmptyRange();
    std::vector<WindowSample> out;
    out.reserve(static_cast<std::size_t>(last - first + 1));
    for (std::int64_t t = first; t <= last; ++t) out.push_back(window_at(frame, lookback, horizon, t));
    return out;
}

std::pair<SeriesFrame, StandardizeStats> standardize(const SeriesFrame& frame, std::int64_t lo,
                                                     std::int64_t hi) {
    const Matrix range = frame.steps(lo, hi);
    const auto n = frame.n_variates();
    StandardizeStats stats;
    stats.mean = range.rowwise().mean();
    stats.stdev.resize(n);
    stats.clamped.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double var = (range.row(i).array() - stats.mean(i)).square().mean();
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            stats.stdev(i) = sd;
        } else {
            stats.stdev(i) = 1.0;
            stats.clamped[static_cast<std::size_t>(i)] = true;
        }
    }
    Matrix v = frame.values();
    for (Eigen::Index i = 0; i < n; ++i) v.row(i) = (v.row(i).array() - stats.mean(i)) / stats.stdev(i);
    return {SeriesFrame(std::move(v), frame.variate_names(), frame.frequency()), std::move(stats)};
}

void validate_spec(const SyntheticSpec& spec) {
    if (spec.n_variates < 1) throw BadSchedule("n_variates must be positive");
    if (spec.n_steps < 1) throw BadSchedule("n_steps must be positive");
    if (spec.schedule.empty()) throw BadSchedule("empty schedule");
    if (spec.schedule.front().start != 1) throw BadSchedule("schedule must start at step 1");
    for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
        const auto& e = spec.schedule[i];
        if (e.regime < 0 || e.regime >= static_cast<int>(spec.regimes.size()))
            throw BadSchedule("unknown regime id " + std::to_string(e.regime));
        if (e.start > spec.n_steps) throw BadSchedule("segment starts past n_steps");
        if (i > 0 && e.start <= spec.schedule[i - 1].start)
            throw BadSchedule("segment starts must be strictly increasing");
    }
    // A regime recurs when it owns two segments separated by another regime.
    int recurring = 0;
    for (int r = 0; r < static_cast<int>(spec.regimes.size()); ++r) {
        std::vector<std::size_t> at;
        for (std::size_t i = 0; i < spec.schedule.size(); ++i)
            if (spec.schedule[i].regime == r) at.push_back(i);
        bool recurs = false;
        for (std::size_t a = 0; a + 1 < at.size() && !recurs; ++a)
            for (std::size_t b = a + 1; b < at.size() && !recurs; ++b)
                for (std::size_t k = at[a] + 1; k < at[b]; ++k)
                    if (spec.schedule[k].regime != r) recurs = true;
        if (recurs) ++recurring;
    }
    if (recurring < 2) throw BadSchedule("need at least two recurring regimes");
    for (const auto& reg : spec.regimes) {
        if (!(reg.period > 0)) throw BadSchedule("regime period must be positive");
        if (reg.noise < 0) throw BadSchedule("regime noise must be nonnegative");
    }
}

SyntheticSeries generate_synthetic(const SyntheticSpec& spec) {
    validate_spec(spec);
    const int n = spec.n_variates;
    const std::int64_t steps = spec.n_steps;

    SyntheticSeries out;
    out.labels.resize(static_cast<std::size_t>(steps));
    for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
        const std::int64_t end =
            i + 1 < spec.schedule.size() ? spec.schedule[i + 1].start - 1 : steps;
        for (std::int64_t t = spec.schedule[i].start; t <= end; ++t)
            out.labels[static_cast<std::size_t>(t - 1)] = spec.schedule[i].regime;
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix values(n, steps);
    std::vector<double> e1(static_cast<std::size_t>(n), 0.0);
    std::vector<double> e2(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t t = 1; t <= steps; ++t) {
        const Regime& reg = spec.regimes[static_cast<std::size_t>(out.labels[t - 1])];
        for (int i = 0; i < n; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
            const double season =
                reg.amplitude *
                std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / reg.period + phase);
            const double shock = gauss(rng);
            const double e = reg.ar1 * e1[iu] + reg.ar2 * e2[iu] + reg.noise * shock;
            e2[iu] = e1[iu];
            e1[iu] = e;
            values(i, t - 1) = reg.level + season + e;
        }
    }

    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
    out.frame = SeriesFrame(std::move(values), std::move(names), "synthetic");
    return out;
}

std::vector<ScheduleEntry> recurring_schedule(std::int64_t n_steps, int n_regimes,
                                              std::int64_t segment_length, std::int64_t jitter,
                                              std::uint64_t seed) {
    if (n_regimes < 2) throw BadSchedule("need at least two regimes");
    if (segment_length < 1 || jitter < 0 || jitter >= segment_length)
        throw BadSchedule("segment length must exceed jitter");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::int64_t> wobble(-jitter, jitter);
    std::vector<ScheduleEntry> schedule;
    std::int64_t start = 1;
    int regime = 0;
    while (start <= n_steps) {
        schedule.push_back({start, regime});
        start += segment_length + wobble(rng);
        regime = (regime + 1) % n_regimes;
    }
    return schedule;
}

SyntheticSpec default_synthetic_spec(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_variates = 4;
    spec.n_steps = 6000;
    spec.seed = seed;
    spec.regimes = {
        Regime{.ar1 = 0.6, .ar2 = -0.2, .amplitude = 1.0, .period = 24, .noise = 0.15, .level = 0.0},
        Regime{.ar1 = 0.3, .ar2 = 0.1, .amplitude = 2.0, .period = 12, .noise = 0.15, .level = 1.5},
        Regime{.ar1 = 0.8, .ar2 = -0.1, .amplitude = 0.5, .period = 48, .noise = 0.15, .level = -1.0},
    };
    spec.schedule = recurring_schedule(spec.n_steps, 3, 240, 60, seed);
    return spec;
}

GuardedStream::GuardedStream(const SeriesFrame& frame, std::int64_t clock, bool oracle_mode)
    : frame_(&frame), clock_(clock), oracle_mode_(oracle_mode) {
    if (clock < 1 || clock > frame.n_steps())
        throw DimMismatch("clock " + std::to_string(clock) + " outside [1, T]");
}

void GuardedStream::advance_to(std::int64_t clock) {
    if (clock < clock_ || clock > frame_->n_steps())
        throw DimMismatch("clock may only move forward within [1, T]");
    clock_ = clock;
}

void GuardedStream::check(std::int64_t t0, std::int64_t t1) {
    if (t1 <= clock_) return;
    if (!oracle_mode_) throw LeakageViolation(std::max(t0, clock_ + 1), clock_);
    oracle_reads_ += t1 - std::max(t0, clock_ + 1) + 1;
}

Vector GuardedStream::read(std::int64_t t) {
    check(t, t);
    return frame_->step(t);
}

Matrix GuardedStream::read_range(std::int64_t t0, std::int64_t t1) {
    check(t0, t1);
    return frame_->steps(t0, t1);
}

WindowSample GuardedStream::sample(std::int64_t origin, int lookback, int horizon) {
    check(origin - lookback + 1, origin + horizon);
    return window_at(*frame_, lookback, horizon, origin);
}

Matrix GuardedStream::lookback(std::int64_t origin, int lookback) {
    return read_range(origin - lookback + 1, origin);
}

GuardedStream guarded_view(const SeriesFrame& frame, std::int64_t clock, bool oracle_mode) {
    return GuardedStream(frame, clock, oracle_mode);
}

}  // namespace driftcast::data
