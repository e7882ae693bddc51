#include "driftcast/errors.hpp"
#include "driftcast/seriesdata.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace driftcast;
using namespace driftcast::data;
using testutil::TempDir;
using testutil::write_file;

namespace {

SeriesFrame ramp(int n, std::int64_t t_max) {
    Matrix v(n, t_max);
    for (int i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < t_max; ++t) v(i, t) = 100.0 * i + static_cast<double>(t + 1);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
    return SeriesFrame(v, names);
}

SyntheticSpec two_regime_spec(std::int64_t steps, std::vector<ScheduleEntry> schedule) {
    SyntheticSpec s;
    s.n_variates = 2;
    s.n_steps = steps;
    s.regimes = {Regime{0.5, 0.1, 1.0, 12.0, 0.1, 0.0}, Regime{-0.3, 0.0, 2.0, 7.0, 0.2, 3.0}};
    s.schedule = std::move(schedule);
    s.seed = 11;
    return s;
}

}  // namespace

TEST_CASE("csv with a date column") {
    TempDir dir("csv");
    const auto p = dir.path / "a.csv";
    write_file(p, "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n");
    const auto f = load_csv(p);
    CHECK(f.n_variates() == 2);
    CHECK(f.n_steps() == 3);
    CHECK(f.variate_names() == std::vector<std::string>{"a", "b"});
    CHECK(f.step(2)(0) == 3.0);
    CHECK(f.step(3)(1) == 6.0);
}

TEST_CASE("csv errors") {
    TempDir dir("csverr");
    SUBCASE("non-numeric cell") {
        write_file(dir.path / "x.csv", "x\n1\nfoo\n");
        try {
            (void)load_csv(dir.path / "x.csv");
            FAIL("expected NonNumericCell");
        } catch (const NonNumericCell& e) {
            CHECK(e.row() == 2);
            CHECK(e.col() == 1);
        }
    }
    SUBCASE("ragged") {
        write_file(dir.path / "r.csv", "a,b\n1,2\n3\n");
        CHECK_THROWS_AS((void)load_csv(dir.path / "r.csv"), RaggedRows);
    }
    SUBCASE("header only") {
        write_file(dir.path / "e.csv", "a,b\n");
        CHECK_THROWS_AS((void)load_csv(dir.path / "e.csv"), EmptyData);
    }
    SUBCASE("missing") { CHECK_THROWS_AS((void)load_csv(dir.path / "nope.csv"), MissingFile); }
}

TEST_CASE("csv with seven columns and 17420 rows") {
    TempDir dir("big");
    std::string text = "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
    for (int r = 0; r < 17420; ++r) {
        text += "t" + std::to_string(r);
        for (int c = 0; c < 7; ++c) text += "," + std::to_string(r * 0.5 + c);
        text += "\n";
    }
    write_file(dir.path / "big.csv", text);
    const auto f = load_csv(dir.path / "big.csv");
    CHECK(f.n_variates() == 7);
    CHECK(f.n_steps() == 17420);
}

TEST_CASE("chronological split") {
    // Independent floor arithmetic in integers: T*r1/sum with r1, r2 scaled to 100.
    auto expect = [](std::int64_t t, std::int64_t r1, std::int64_t r12) {
        return SplitIndices{t * r1 / 100, t * r12 / 100, t};
    };
    CHECK(chronological_split(1000, {20, 5, 75}) == expect(1000, 20, 25));
    CHECK(chronological_split(1000, {20, 5, 75}) == SplitIndices{200, 250, 1000});
    CHECK(chronological_split(17420, {20, 5, 75}) == expect(17420, 20, 25));
    CHECK(chronological_split(17420, {20, 5, 75}) == SplitIndices{3484, 4355, 17420});
    CHECK_THROWS_AS((void)chronological_split(100, {1, 0, 0}), DegenerateSplit);
    CHECK_THROWS_AS((void)chronological_split(100, {0, 0, 0}), DegenerateSplit);
}

TEST_CASE("split boundaries partition the series") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> len(20, 5000);
    std::uniform_real_distribution<double> w(0.5, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t t = len(rng);
        const SplitRatios r{w(rng), w(rng), w(rng)};
        SplitIndices s;
        try {
            s = chronological_split(t, r);
        } catch (const DegenerateSplit&) {
            continue;
        }
        CHECK(0 < s.train_end);
        CHECK(s.train_end < s.valid_end);
        CHECK(s.valid_end < s.test_end);
        CHECK(s.test_end == t);
        const auto frame = ramp(2, t);
        Matrix joined(2, t);
        joined << frame.steps(1, s.train_end), frame.steps(s.train_end + 1, s.valid_end),
            frame.steps(s.valid_end + 1, s.test_end);
        CHECK(joined == frame.values());
    }
}

TEST_CASE("window enumeration") {
    const auto f10 = ramp(1, 10);
    auto w = make_windows(f10, 3, 2, 1, 10);
    REQUIRE(w.size() == 6);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i].origin == static_cast<std::int64_t>(3 + i));

    CHECK_THROWS_AS((void)make_windows(ramp(1, 5), 5, 1, 1, 5), EmptyRange);

    w = make_windows(ramp(1, 6), 2, 1, 2, 5);
    REQUIRE(w.size() == 4);
    CHECK(w.front().origin == 2);
    CHECK(w.back().origin == 5);
}

TEST_CASE("window contents never exceed their origin bounds") {
    const auto f = ramp(3, 60);
    for (int L : {1, 4, 9})
        for (int H : {1, 3, 7}) {
            for (const auto& s : make_windows(f, L, H, 1, 60)) {
                // ramp values encode their own time index: 100*i + t
                for (int i = 0; i < 3; ++i) {
                    CHECK(s.x(i, 0) == 100.0 * i + static_cast<double>(s.origin - L + 1));
                    CHECK(s.x(i, L - 1) == 100.0 * i + static_cast<double>(s.origin));
                    CHECK(s.y(i, 0) == 100.0 * i + static_cast<double>(s.origin + 1));
                    CHECK(s.y(i, H - 1) == 100.0 * i + static_cast<double>(s.origin + H));
                }
            }
        }
}

TEST_CASE("standardize") {
    Matrix v(2, 3);
    v << 5, 5, 5, 1, 3, 2;
    const SeriesFrame f(v, {"c", "d"});
    SUBCASE("constant variate is clamped") {
        const auto [z, st] = standardize(f, 1, 3);
        CHECK(z.step(1)(0) == 0.0);
        CHECK(z.step(3)(0) == 0.0);
        CHECK(st.stdev(0) == 1.0);
        CHECK(st.clamped[0]);
        CHECK_FALSE(st.clamped[1]);
    }
    SUBCASE("population std over the stats range") {
        // [1, 3]: mean 2, population std 1
        const auto [z, st] = standardize(f, 1, 2);
        CHECK(st.mean(1) == doctest::Approx(2.0));
        CHECK(st.stdev(1) == doctest::Approx(1.0));
        CHECK(z.step(1)(1) == doctest::Approx(-1.0));
        CHECK(z.step(2)(1) == doctest::Approx(1.0));
        CHECK(z.step(3)(1) == doctest::Approx(0.0));
    }
    SUBCASE("round trip") {
        std::mt19937_64 rng(5);
        const SeriesFrame g(testutil::random_matrix(rng, 4, 200, 3.0), {"a", "b", "c", "d"});
        const auto [z, st] = standardize(g, 1, 50);
        const auto back = st.invert(z);
        CHECK((back.values() - g.values()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("synthetic generation") {
    SUBCASE("deterministic") {
        const auto spec = default_synthetic_spec(7);
        const auto a = generate_synthetic(spec);
        const auto b = generate_synthetic(spec);
        CHECK(a.frame == b.frame);
        CHECK(a.labels == b.labels);
        CHECK(a.frame.n_variates() == 4);
        CHECK(a.frame.n_steps() == 6000);
    }
    SUBCASE("pure sinusoid") {
        SyntheticSpec s;
        s.n_variates = 1;
        s.n_steps = 64;
        s.regimes = {Regime{0, 0, 1.0, 8.0, 0.0, 0.0}, Regime{0, 0, 1.0, 8.0, 0.0, 0.0}};
        s.schedule = {{1, 0}, {9, 1}, {17, 0}, {25, 1}};
        const auto out = generate_synthetic(s);
        for (std::int64_t t = 1; t <= 64; ++t)
            CHECK(out.frame.step(t)(0) ==
                  doctest::Approx(std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 8.0)).epsilon(1e-12));
        for (std::int64_t t = 1; t + 8 <= 64; ++t)
            CHECK(std::abs(out.frame.step(t)(0) - out.frame.step(t + 8)(0)) < 1e-12);
    }
    SUBCASE("labels follow the schedule") {
        const auto out = generate_synthetic(two_regime_spec(40, {{1, 0}, {11, 1}, {21, 0}, {31, 1}}));
        for (std::int64_t t = 1; t <= 40; ++t) {
            const int expect = ((t - 1) / 10) % 2;
            CHECK(out.labels[static_cast<std::size_t>(t - 1)] == expect);
        }
    }
    SUBCASE("bad schedules") {
        CHECK_THROWS_AS((void)generate_synthetic(two_regime_spec(40, {{2, 0}, {11, 1}, {21, 0}, {31, 1}})),
                        BadSchedule);
        CHECK_THROWS_AS((void)generate_synthetic(two_regime_spec(40, {{1, 0}, {21, 1}})), BadSchedule);
        CHECK_THROWS_AS((void)generate_synthetic(two_regime_spec(40, {{1, 0}, {11, 1}, {21, 0}})), BadSchedule);
        CHECK_THROWS_AS((void)generate_synthetic(two_regime_spec(40, {{1, 0}, {11, 5}, {21, 0}, {31, 1}})),
                        BadSchedule);
    }
    SUBCASE("recurring schedule covers the series") {
        const auto sch = recurring_schedule(6000, 3, 240, 60, 9);
        REQUIRE(!sch.empty());
        CHECK(sch.front().start == 1);
        for (std::size_t i = 1; i < sch.size(); ++i) {
            CHECK(sch[i].start > sch[i - 1].start);
            CHECK(sch[i].regime != sch[i - 1].regime);
        }
        CHECK(sch.back().start <= 6000);
    }
}

TEST_CASE("guarded stream") {
    const auto f = ramp(1, 10);
    SUBCASE("future read rejected") {
        auto g = guarded_view(f, 5, false);
        try {
            (void)g.read(6);
            FAIL("expected LeakageViolation");
        } catch (const LeakageViolation& e) {
            CHECK(e.index() == 6);
            CHECK(e.clock() == 5);
        }
        CHECK_THROWS_AS((void)g.sample(4, 2, 2), LeakageViolation);
    }
    SUBCASE("present read allowed") {
        auto g = guarded_view(f, 5, false);
        CHECK(g.read(5)(0) == 5.0);
        CHECK(g.sample(3, 2, 2).y(0, 1) == 5.0);
        CHECK(g.oracle_reads() == 0);
    }
    SUBCASE("oracle reads are audited") {
        auto g = guarded_view(f, 5, true);
        CHECK(g.read(6)(0) == 6.0);
        CHECK(g.oracle_reads() == 1);
    }
}
