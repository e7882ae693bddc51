#include "driftcast/cli.hpp"

#include "driftcast/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace driftcast::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MissingFile(path.string());
    f << text;
    if (!f) throw MissingFile(path.string());
}

std::string model_name(const ExperimentConfig& cfg) { return models::to_string(cfg.model); }

std::string pretrained_stem(const ExperimentConfig& cfg, int horizon, std::uint64_t seed) {
    return cfg.dataset_name() + "_" + model_name(cfg) + "_pretrained_H" + std::to_string(horizon) + "_seed" +
           std::to_string(seed);
}

std::string stem_of(const ExperimentConfig& cfg, int horizon, const engine::Strategy& s, std::uint64_t seed) {
    return cell_stem(cfg.dataset_name(), model_name(cfg), s.strategy_name(), s.variant_name(), horizon, seed);
}

std::string stem_of(const engine::RunReport& r) {
    return cell_stem(r.dataset, r.model, r.strategy, r.variant, r.horizon, r.seed);
}

std::string trace_csv(const engine::RunReport& r) {
    std::string out = "t,loss,strategy\n";
    const std::string name = r.variant == "none" ? r.strategy : r.variant;
    for (const auto& p : r.trace) out += std::to_string(p.t) + "," + format_double(p.loss) + "," + name + "\n";
    return out;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; }

/// Serializes log lines from worker threads.
class SyncLog {
public:
    explicit SyncLog(std::ostream& out) : out_(out) {}
    void line(const std::string& s) {
        std::lock_guard lock(mu_);
        out_ << s << '\n';
        out_.flush();
    }

private:
    std::ostream& out_;
    std::mutex mu_;
};

models::ForecastModel pretrained_for(const ExperimentConfig& cfg, const engine::PreparedData& data, int horizon,
                                     std::uint64_t seed, const OutputLayout& layout, bool reuse) {
    const fs::path ckpt = layout.checkpoints() / (pretrained_stem(cfg, horizon, seed) + ".ckpt");
    if (reuse && fs::exists(ckpt)) {
        const auto loaded = nn::load_checkpoint(ckpt);
        if (const auto* s = loaded.find("model")) return models::from_checkpoint(*s);
    }
    const auto cell = cell_config(cfg, horizon, {engine::StrategyKind::Frozen, engine::Variant::None}, seed);
    auto trained = engine::pretrain_cell(data, cell);
    nn::Checkpoint out;
    out.sections.push_back(models::to_checkpoint(*trained.pretrained));
    fs::create_directories(layout.checkpoints());
    nn::save_checkpoint(ckpt, out);
    return std::move(*trained.pretrained);
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
    const auto* err = dynamic_cast<const Error*>(&e);
    if (err == nullptr) return 1;
    switch (err->error_class()) {
        case ErrorClass::Config: return 2;
        case ErrorClass::Data: return 3;
        case ErrorClass::Numeric: return 4;
        case ErrorClass::Usage: return 1;
    }
    return 1;
}

void apply_deltas(std::vector<engine::RunReport>& reports) {
    for (auto& r : reports) {
        r.delta_mse.reset();
        r.delta_mae.reset();
        if (r.strategy == "gd_optimal" && r.variant == "none") continue;
        for (const auto& o : reports) {
            if (o.strategy != "gd_optimal" || o.variant != "none") continue;
            if (o.dataset != r.dataset || o.model != r.model || o.lookback != r.lookback ||
                o.horizon != r.horizon || o.seed != r.seed)
                continue;
            const auto gap = engine::compute_gap(r, o);
            r.delta_mse = gap.mse;
            r.delta_mae = gap.mae;
            break;
        }
    }
}

std::string summary_csv(const std::vector<engine::RunReport>& reports) {
    std::string out = "dataset,model,strategy,variant,H,seed,mse,mae,delta_mse,delta_mae\n";
    for (const auto& r : reports) {
        out += r.dataset + "," + r.model + "," + r.strategy + "," + r.variant + "," + std::to_string(r.horizon) +
               "," + std::to_string(r.seed) + "," + format_double(r.mse) + "," + format_double(r.mae) + "," +
               opt_double(r.delta_mse) + "," + opt_double(r.delta_mae) + "\n";
    }
    return out;
}

std::string summary_table(const std::vector<engine::RunReport>& reports) {
    std::ostringstream o;
    auto pct = [](const std::optional<double>& v) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.2f%%", *v);
        return buf;
    };
    o << std::left << std::setw(14) << "strategy" << std::setw(16) << "variant" << std::right << std::setw(4)
      << "H" << std::setw(6) << "seed" << std::setw(12) << "mse" << std::setw(12) << "mae" << std::setw(11)
      << "d_mse" << std::setw(11) << "d_mae" << '\n';
    for (const auto& r : reports) {
        o << std::left << std::setw(14) << r.strategy << std::setw(16) << r.variant << std::right << std::setw(4)
          << r.horizon << std::setw(6) << r.seed << std::fixed << std::setprecision(6) << std::setw(12) << r.mse
          << std::setw(12) << r.mae << std::setw(11) << pct(r.delta_mse) << std::setw(11) << pct(r.delta_mae)
          << '\n';
    }
    return o.str();
}

nn::Checkpoint cell_checkpoint(const models::ForecastModel& model, const adapt::DriftAdapter* adapter) {
    nn::Checkpoint ckpt;
    ckpt.sections.push_back(models::to_checkpoint(model));
    if (adapter != nullptr) {
        auto a = adapter->to_checkpoint();
        for (auto& s : a.sections) ckpt.sections.push_back(std::move(s));
    }
    return ckpt;
}

RunOutcome cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs, std::ostream& log_stream) {
    const OutputLayout layout{out_dir};
    fs::create_directories(layout.reports());
    fs::create_directories(layout.checkpoints());
    const auto data = load_data(cfg);
    SyncLog log(log_stream);

    struct Group {
        int horizon;
        std::uint64_t seed;
    };
    std::vector<Group> groups;
    for (int h : cfg.horizons)
        for (auto s : cfg.seeds) groups.push_back({h, s});

    // slot (h index, strategy index, seed index), config order
    const std::size_t n_strat = cfg.strategies.size();
    const std::size_t n_seed = cfg.seeds.size();
    auto slot = [&](std::size_t g, std::size_t k) {
        const std::size_t hi = g / n_seed;
        const std::size_t si = g % n_seed;
        return (hi * n_strat + k) * n_seed + si;
    };
    std::vector<std::optional<engine::RunReport>> done(groups.size() * n_strat);
    std::vector<int> codes(done.size(), 0);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t g = next++; g < groups.size(); g = next++) {
            const auto [h, seed] = groups[g];
            std::optional<models::ForecastModel> pre;
            int pre_code = 0;
            std::string pre_err;
            try {
                pre = pretrained_for(cfg, data, h, seed, layout, false);
                log.line("pretrained H" + std::to_string(h) + " seed" + std::to_string(seed));
            } catch (const std::exception& e) {
                pre_code = exit_code_for(e);
                pre_err = e.what();
            }
            for (std::size_t k = 0; k < n_strat; ++k) {
                const auto& strat = cfg.strategies[k];
                const std::string stem = stem_of(cfg, h, strat, seed);
                if (!pre) {
                    codes[slot(g, k)] = pre_code;
                    log.line("FAILED " + stem + ": " + pre_err);
                    continue;
                }
                try {
                    const auto cell = cell_config(cfg, h, strat, seed);
                    auto trained = engine::train_cell(data, cell, &*pre);
                    nn::save_checkpoint(layout.checkpoints() / (stem + ".ckpt"),
                                        cell_checkpoint(trained.model, trained.adapter ? &*trained.adapter : nullptr));
                    done[slot(g, k)] = engine::evaluate_cell(data, cell, trained);
                    log.line("done " + stem + " mse=" + format_double(done[slot(g, k)]->mse));
                } catch (const std::exception& e) {
                    codes[slot(g, k)] = exit_code_for(e);
                    log.line("FAILED " + stem + ": " + e.what());
                }
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(groups.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunOutcome outcome;
    std::vector<std::string> complete;
    for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi)
        for (std::size_t k = 0; k < n_strat; ++k)
            for (std::size_t si = 0; si < n_seed; ++si) {
                const std::size_t i = (hi * n_strat + k) * n_seed + si;
                if (done[i]) {
                    outcome.reports.push_back(*done[i]);
                } else {
                    outcome.failed.push_back(stem_of(cfg, cfg.horizons[hi], cfg.strategies[k], cfg.seeds[si]));
                    if (outcome.exit_code == 0) outcome.exit_code = codes[i] != 0 ? codes[i] : 1;
                }
            }
    apply_deltas(outcome.reports);

    for (const auto& r : outcome.reports) {
        const std::string stem = stem_of(r);
        complete.push_back(stem);
        write_text(layout.reports() / (stem + ".json"), r.to_json().dump(2) + "\n");
        if (!r.trace.empty()) write_text(layout.traces() / (stem + ".csv"), trace_csv(r));
    }
    write_text(layout.summary(), summary_csv(outcome.reports));

    nlohmann::ordered_json manifest;
    manifest["config"] = serialize_config(cfg);
    manifest["complete"] = complete;
    manifest["incomplete"] = outcome.failed;
    write_text(layout.manifest(), manifest.dump(2) + "\n");

    log_stream << summary_table(outcome.reports);
    return outcome;
}

void cmd_pretrain(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    const OutputLayout layout{out_dir};
    const auto data = load_data(cfg);
    for (int h : cfg.horizons)
        for (auto seed : cfg.seeds) {
            (void)pretrained_for(cfg, data, h, seed, layout, false);
            log << "saved " << (layout.checkpoints() / (pretrained_stem(cfg, h, seed) + ".ckpt")).string() << '\n';
        }
}

void cmd_train_adapter(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    const OutputLayout layout{out_dir};
    const auto data = load_data(cfg);
    for (int h : cfg.horizons)
        for (auto seed : cfg.seeds) {
            std::optional<models::ForecastModel> pre;
            for (const auto& strat : cfg.strategies) {
                if (!strat.uses_adapter()) continue;
                if (!pre) pre = pretrained_for(cfg, data, h, seed, layout, true);
                const auto cell = cell_config(cfg, h, strat, seed);
                auto trained = engine::train_cell(data, cell, &*pre);
                const fs::path path = layout.checkpoints() / (stem_of(cfg, h, strat, seed) + ".ckpt");
                nn::save_checkpoint(path, cell_checkpoint(trained.model, &*trained.adapter));
                log << "saved " << path.string() << '\n';
            }
        }
}

void cmd_synth_gen(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    const auto series = data::generate_synthetic(synthetic_spec(cfg));
    const auto& frame = series.frame;
    std::string csv = "timestamp";
    for (const auto& n : frame.variate_names()) csv += "," + n;
    csv += "\n";
    for (std::int64_t t = 1; t <= frame.n_steps(); ++t) {
        csv += std::to_string(t);
        const Vector v = frame.step(t);
        for (Eigen::Index i = 0; i < v.size(); ++i) csv += "," + format_double(v(i));
        csv += "\n";
    }
    std::string labels = "timestamp,regime\n";
    for (std::size_t i = 0; i < series.labels.size(); ++i)
        labels += std::to_string(i + 1) + "," + std::to_string(series.labels[i]) + "\n";
    write_text(out_dir / "synthetic.csv", csv);
    write_text(out_dir / "synthetic_labels.csv", labels);
    log << "wrote " << (out_dir / "synthetic.csv").string() << " (" << frame.n_steps() << " steps)\n";
}

std::size_t cmd_export_drift(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_csv) {
    if (!fs::exists(checkpoint)) throw MissingCheckpoint(checkpoint.string());
    const auto ckpt = nn::load_checkpoint(checkpoint);
    const auto* ms = ckpt.find("model");
    if (ms == nullptr || ckpt.find("adapter.config") == nullptr) throw MissingCheckpoint(checkpoint.string());
    const auto model = models::from_checkpoint(*ms);
    const auto adapter = adapt::DriftAdapter::from_checkpoint(ckpt, model.registry());
    const auto data = load_data(cfg);
    const int L = model.dims().lookback;
    const int H = model.dims().horizon;
    const auto rows =
        engine::export_drift(adapter, data.frame, L, H, data.split.train_end + 1, data.frame.n_steps() - H);

    std::string out = "t,kind";
    const Eigen::Index d = rows.empty() ? 0 : rows.front().values.size();
    for (Eigen::Index i = 0; i < d; ++i) out += ",c" + std::to_string(i);
    out += "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.t) + "," + r.kind;
        for (Eigen::Index i = 0; i < r.values.size(); ++i) out += "," + format_double(r.values(i));
        out += "\n";
    }
    write_text(out_csv, out);
    return rows.size();
}

std::vector<engine::RunReport> cmd_report(const fs::path& out_dir, std::ostream& log) {
    const OutputLayout layout{out_dir};
    if (!fs::is_directory(layout.reports())) throw MissingFile(layout.reports().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(layout.reports()))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    // keep the run's cell order when the manifest lists it; unlisted files go last
    if (fs::exists(layout.manifest())) {
        std::map<std::string, std::size_t> rank;
        try {
            std::ifstream in(layout.manifest());
            const auto m = nlohmann::json::parse(in);
            for (const auto& s : m.value("complete", nlohmann::json::array())) rank.emplace(s.get<std::string>(), rank.size());
        } catch (const nlohmann::json::exception& e) {
            throw BadValue(layout.manifest().filename().string(), e.what());
        }
        const auto pos = [&](const fs::path& p) {
            const auto it = rank.find(p.stem().string());
            return it == rank.end() ? rank.size() : it->second;
        };
        std::stable_sort(files.begin(), files.end(), [&](const auto& a, const auto& b) { return pos(a) < pos(b); });
    }
    std::vector<engine::RunReport> reports;
    for (const auto& f : files) {
        std::ifstream in(f);
        nlohmann::ordered_json j;
        try {
            in >> j;
            reports.push_back(engine::RunReport::from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw BadValue(f.filename().string(), e.what());
        }
    }
    write_text(layout.summary(), summary_csv(reports));
    log << summary_table(reports);
    return reports;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"driftcast: online forecasting under delayed feedback", "driftcast"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--config", config_path, "experiment config file");
    app.add_option("--out", out_path, "output directory (overrides output_dir)");
    app.add_option("--seed", seed, "run only this seed");
    app.add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth-gen", "write the synthetic series as CSV");
    auto* pre = app.add_subcommand("pretrain", "pretrain and save forecasters");
    auto* tad = app.add_subcommand("train-adapter", "train and save adapters");
    auto* run = app.add_subcommand("run", "full experiment grid");
    auto* exp = app.add_subcommand("export-drift", "dump per-step concepts and drift");
    std::string ckpt_path;
    std::string export_out;
    exp->add_option("--checkpoint", ckpt_path, "adapter checkpoint")->required();
    exp->add_option("--output", export_out, "CSV path");
    auto* rep = app.add_subcommand("report", "rebuild summary.csv from reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : parse_config_file(config_path);
        if (seed) cfg.seeds = {*seed};
        const fs::path out_dir = out_path.empty() ? fs::path(cfg.output_dir) : fs::path(out_path);

        if (synth->parsed()) {
            cmd_synth_gen(cfg, out_dir, out);
        } else if (pre->parsed()) {
            cmd_pretrain(cfg, out_dir, out);
        } else if (tad->parsed()) {
            cmd_train_adapter(cfg, out_dir, out);
        } else if (run->parsed()) {
            return cmd_run(cfg, out_dir, jobs, out).exit_code;
        } else if (exp->parsed()) {
            const fs::path ckpt(ckpt_path);
            const fs::path dest = export_out.empty() ? out_dir / "drift" / (ckpt.stem().string() + ".csv")
                                                     : fs::path(export_out);
            const auto n = cmd_export_drift(cfg, ckpt, dest);
            out << "wrote " << n << " rows to " << dest.string() << '\n';
        } else if (rep->parsed()) {
            (void)cmd_report(out_dir, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}

}  // namespace driftcast::cli
