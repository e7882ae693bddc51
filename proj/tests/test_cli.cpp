#include "driftcast/cli.hpp"
#include "driftcast/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace driftcast;
using namespace driftcast::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(# tiny grid
lookback = 24
horizon = [4]
strategy = ["frozen", "gd_practical", "gd_optimal", "proceed"]
seeds = [0]

[synthetic]
n_steps = 1500

[model]
hidden = 16

[pretrain]
epochs = 2

[adapter]
concept_dim = 8
rank = 3
epochs = 1

[online]
trace = true
)";

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

int call(std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), "driftcast");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str() + e.str();
    return rc;
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("empty text gives the defaults") {
        CHECK(same_config(parse_config_text(""), ExperimentConfig{}));
        CHECK(same_config(parse_config_text("# only a comment\n\n"), ExperimentConfig{}));
    }
    SUBCASE("arrays, sections and dotted keys") {
        const auto c = parse_config_text("horizon = [4, 8, 16]\n[adapter]\nrank = 7\n[]\nmodel.hidden = 12\n");
        CHECK(c.horizons == std::vector<int>{4, 8, 16});
        CHECK(c.adapter.rank == 7);
        CHECK(c.hidden == 12);
        CHECK(parse_config_text("horizon = 24").horizons == std::vector<int>{24});
    }
    SUBCASE("misspelled strategy") {
        try {
            (void)parse_config_text("strategy = [\"procede\"]");
            FAIL("expected BadValue");
        } catch (const BadValue& e) {
            CHECK(e.key() == "strategy");
        }
    }
    SUBCASE("unknown key") {
        try {
            (void)parse_config_text("[adapter]\nranks = 3\n");
            FAIL("expected UnknownKey");
        } catch (const UnknownKey& e) {
            CHECK(e.key() == "adapter.ranks");
        }
    }
    SUBCASE("syntax errors carry the line") {
        try {
            (void)parse_config_text("lookback = 24\n\nhorizon = [4, 8\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS((void)parse_config_text("lookback = 24\nlookback = 48\n"), ParseError);
        CHECK_THROWS_AS((void)parse_config_text("[model]\nhidden = 1\n[]\nmodel.hidden = 2\n"), ParseError);
    }
    SUBCASE("bad values") {
        CHECK_THROWS_AS((void)parse_config_text("lookback = 0"), BadValue);
        CHECK_THROWS_AS((void)parse_config_text("pretrain.lr = -1"), BadValue);
        CHECK_THROWS_AS((void)parse_config_text("data.split = [1, 2]"), BadValue);
        CHECK_THROWS_AS((void)parse_config_text("model.revin = 3"), BadValue);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS((void)parse_config_file("/nonexistent/x.toml"), MissingFile); }
}

TEST_CASE("serialized config is a fixed point") {
    std::vector<ExperimentConfig> cases{ExperimentConfig{}, parse_config_text(kSmallConfig)};
    auto odd = parse_config_text(
        "data.source = \"csv\"\ndata.path = \"a b/c.csv\"\ndata.split = [0.6, 0.1, 0.3]\nonline.lr = 1.5e-5\n"
        "adapter.aggregation = \"weighted\"\nadapter.prev_batch_encoder = \"e_prime\"\n"
        "strategy = [\"feedback_only\", \"shared_encoder\"]\n");
    cases.push_back(odd);
    for (const auto& c : cases) {
        const auto text = serialize_config(c);
        const auto back = parse_config_text(text);
        CHECK(same_config(back, c));
        CHECK(serialize_config(back) == text);
    }
    CHECK(odd.dataset_name() == "c");
}

TEST_CASE("naming and exit codes") {
    CHECK(cell_stem("synthetic", "mlp", "proceed", "none", 8, 2) == "synthetic_mlp_proceed_none_H8_seed2");
    CHECK(exit_code_for(ParseError(1, "x")) == 2);
    CHECK(exit_code_for(UnknownKey("x")) == 2);
    CHECK(exit_code_for(MissingFile("x")) == 3);
    CHECK(exit_code_for(MissingCheckpoint("x")) == 3);
    CHECK(exit_code_for(Diverged("x")) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
    for (double v : {0.1, 1.0 / 3.0, 2.5e-300, -7.0, 123456789.125})
        CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("gap deltas pair with the oracle run") {
    std::vector<engine::RunReport> rs(3);
    for (auto& r : rs) {
        r.dataset = "s";
        r.model = "mlp";
        r.variant = "none";
        r.horizon = 8;
    }
    rs[0].strategy = "gd_practical";
    rs[0].mse = 3.079;
    rs[0].mae = 2.0;
    rs[1].strategy = "gd_optimal";
    rs[1].mse = 0.687;
    rs[1].mae = 1.0;
    rs[2].strategy = "proceed";
    rs[2].seed = 1;  // no partner
    rs[2].mse = 1.0;
    apply_deltas(rs);
    REQUIRE(rs[0].delta_mse);
    CHECK(std::lround(*rs[0].delta_mse) == 348);
    CHECK(*rs[0].delta_mae == 100.0);
    CHECK_FALSE(rs[1].delta_mse);
    CHECK_FALSE(rs[2].delta_mse);
}

TEST_CASE("run, report and export") {
    testutil::TempDir tmp("cli");
    const auto cfg = parse_config_text(kSmallConfig);
    std::ostringstream log;
    const auto outcome = cmd_run(cfg, tmp.path / "a", 2, log);
    REQUIRE(outcome.exit_code == 0);
    REQUIRE(outcome.reports.size() == 4);
    CHECK(outcome.failed.empty());

    const OutputLayout lay{tmp.path / "a"};
    CHECK(fs::exists(lay.manifest()));
    const auto rows = read_csv(lay.summary());
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == std::vector<std::string>{"dataset", "model", "strategy", "variant", "H", "seed", "mse", "mae",
                                              "delta_mse", "delta_mae"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto stem = cell_stem(row[0], row[1], row[2], row[3], std::stoi(row[4]), std::stoull(row[5]));
        std::ifstream in(lay.reports() / (stem + ".json"));
        REQUIRE(in.good());
        const auto j = nlohmann::json::parse(in);
        CHECK(std::stod(row[6]) == j.at("mse").get<double>());
        CHECK(std::stod(row[7]) == j.at("mae").get<double>());
        CHECK(j.at("leakage_audit").at("violations") == 0);
        const bool has_delta = row[2] == "gd_practical" || row[2] == "frozen" || row[2] == "proceed";
        CHECK(!row[8].empty() == has_delta);
        CHECK(fs::exists(lay.traces() / (stem + ".csv")));
    }

    SUBCASE("reruns are byte identical") {
        const auto again = cmd_run(cfg, tmp.path / "b", 1, log);
        REQUIRE(again.exit_code == 0);
        CHECK(testutil::read_file(lay.summary()) == testutil::read_file(tmp.path / "b" / "summary.csv"));
        for (const auto& r : outcome.reports) {
            const auto name = cell_stem(r.dataset, r.model, r.strategy, r.variant, r.horizon, r.seed) + ".json";
            CHECK(testutil::read_file(lay.reports() / name) ==
                  testutil::read_file(tmp.path / "b" / "reports" / name));
        }
    }

    SUBCASE("report rebuilds the summary") {
        const auto before = testutil::read_file(lay.summary());
        fs::remove(lay.summary());
        const auto reports = cmd_report(lay.root, log);
        CHECK(reports.size() == 4);
        CHECK(testutil::read_file(lay.summary()) == before);
    }

    SUBCASE("drift export") {
        const auto ckpt = lay.checkpoints() / "synthetic_mlp_proceed_none_H4_seed0.ckpt";
        REQUIRE(fs::exists(ckpt));
        const auto out = tmp.path / "drift.csv";
        const std::size_t n = cmd_export_drift(cfg, ckpt, out);
        const auto data = engine::prepare(data::generate_synthetic(synthetic_spec(cfg)).frame, cfg.split, true);
        const std::int64_t steps = (data.frame.n_steps() - 4) - (data.split.train_end + 1) + 1;
        CHECK(n == static_cast<std::size_t>(3 * steps));
        const auto csv = read_csv(out);
        REQUIRE(csv.size() == n + 1);
        CHECK(csv[0][0] == "t");
        CHECK(csv[0].size() == 2 + 8);
        for (std::size_t i = 1; i + 2 < csv.size(); i += 3) {
            CHECK(csv[i][1] == "concept_train");
            CHECK(csv[i + 2][1] == "drift");
            for (std::size_t k = 2; k < csv[i].size(); ++k)
                CHECK(std::stod(csv[i + 2][k]) == std::stod(csv[i + 1][k]) - std::stod(csv[i][k]));
        }
        const auto out2 = tmp.path / "drift2.csv";
        (void)cmd_export_drift(cfg, ckpt, out2);
        CHECK(testutil::read_file(out) == testutil::read_file(out2));
        // a model-only checkpoint has no adapter
        CHECK_THROWS_AS((void)cmd_export_drift(cfg, lay.checkpoints() / "synthetic_mlp_frozen_none_H4_seed0.ckpt", out2),
                        MissingCheckpoint);
        CHECK_THROWS_AS((void)cmd_export_drift(cfg, tmp.path / "nope.ckpt", out2), MissingCheckpoint);
    }
}

TEST_CASE("command line") {
    testutil::TempDir tmp("cli");
    std::string text;
    CHECK(call({"--bogus"}, &text) == 2);
    CHECK(call({}, &text) != 0);
    CHECK(call({"run", "--config", (tmp.path / "missing.toml").string()}, &text) == 3);

    testutil::write_file(tmp.path / "bad.toml", "lookback = 24\nfoo = 1\n");
    CHECK(call({"run", "--config", (tmp.path / "bad.toml").string()}, &text) == 2);
    CHECK(text.find("foo") != std::string::npos);

    testutil::write_file(tmp.path / "small.toml", kSmallConfig);
    CHECK(call({"synth-gen", "--config", (tmp.path / "small.toml").string(), "--out", tmp.path.string()}) == 0);
    CHECK(fs::exists(tmp.path / "synthetic.csv"));
    CHECK(fs::exists(tmp.path / "synthetic_labels.csv"));
    CHECK(call({"export-drift", "--config", (tmp.path / "small.toml").string(), "--checkpoint",
                (tmp.path / "none.ckpt").string()}) == 3);
}
