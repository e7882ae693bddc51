#include "driftcast/engine.hpp"

#include "driftcast/errors.hpp"
#include "driftcast/nn/adam.hpp"
#include "driftcast/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace driftcast::engine {

namespace {

struct StrategyName {
    const char* token;
    Strategy strategy;
};

constexpr StrategyName kStrategies[] = {
    {"frozen", {StrategyKind::Frozen, Variant::None}},
    {"gd_practical", {StrategyKind::GdPractical, Variant::None}},
    {"gd_optimal", {StrategyKind::GdOptimal, Variant::None}},
    {"proceed", {StrategyKind::Proceed, Variant::None}},
    {"feedback_only", {StrategyKind::Proceed, Variant::FeedbackOnly}},
    {"concept_only", {StrategyKind::Proceed, Variant::ConceptOnly}},
    {"shared_encoder", {StrategyKind::Proceed, Variant::SharedEncoder}},
    {"unshared_w1w2", {StrategyKind::Proceed, Variant::UnsharedW1W2}},
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_finite(double loss, const char* where) {
    if (!std::isfinite(loss)) throw Diverged(where);
}

std::vector<Matrix> inputs_of(std::span<const data::WindowSample> batch) {
    std::vector<Matrix> xs;
    xs.reserve(batch.size());
    for (const auto& s : batch) xs.push_back(s.x);
    return xs;
}

/// One gradient accumulation on plain forecasts; returns the mean per-sample MSE.
double plain_loss_and_grad(models::ForecastModel& model, std::span<const data::WindowSample> batch,
                           const nn::Modulation* mod = nullptr) {
    const auto xs = inputs_of(batch);
    const auto fwd = models::forward_batch(model, xs, mod);
    const int n = model.dims().n_variates;
    const auto b = static_cast<double>(batch.size());
    double loss = 0.0;
    Matrix d_out(fwd.output.rows(), fwd.output.cols());
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const Matrix yhat = fwd.item(j, n);
        loss += nn::mse(yhat, batch[j].y);
        d_out.middleRows(static_cast<Eigen::Index>(j) * n, n) = nn::mse_grad(yhat, batch[j].y) / b;
    }
    loss /= b;
    check_finite(loss, "training");
    models::backward_batch(model, fwd, d_out);
    return loss;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

std::vector<data::WindowSample> gather(std::span<const data::WindowSample> all, const std::vector<std::size_t>& order,
                                       std::size_t from, std::size_t to) {
    std::vector<data::WindowSample> out;
    out.reserve(to - from);
    for (std::size_t i = from; i < to; ++i) out.push_back(all[order[i]]);
    return out;
}

}  // namespace

// ---- Strategy ------------------------------------------------------------------

Strategy Strategy::parse(const std::string& token) {
    for (const auto& s : kStrategies)
        if (token == s.token) return s.strategy;
    throw BadValue("strategy", "unknown strategy '" + token + "'");
}

std::string Strategy::token() const {
    for (const auto& s : kStrategies)
        if (s.strategy == *this) return s.token;
    return "?";
}

std::string Strategy::strategy_name() const {
    switch (kind) {
        case StrategyKind::Frozen: return "frozen";
        case StrategyKind::GdPractical: return "gd_practical";
        case StrategyKind::GdOptimal: return "gd_optimal";
        case StrategyKind::Proceed: return "proceed";
    }
    return "?";
}

std::string Strategy::variant_name() const {
    switch (variant) {
        case Variant::None: return "none";
        case Variant::FeedbackOnly: return "feedback_only";
        case Variant::ConceptOnly: return "concept_only";
        case Variant::SharedEncoder: return "shared_encoder";
        case Variant::UnsharedW1W2: return "unshared_w1w2";
    }
    return "?";
}

bool Strategy::uses_adapter() const noexcept {
    return kind == StrategyKind::Proceed && variant != Variant::FeedbackOnly;
}

adapt::AdapterConfig Strategy::adapter_config(adapt::AdapterConfig base) const {
    switch (variant) {
        case Variant::ConceptOnly: base.input = adapt::GeneratorInput::TestConcept; break;
        case Variant::SharedEncoder:
            base.train_concept = adapt::TrainConceptSource::TestEncoderLookback;
            base.prev_batch = adapt::TrainConceptSource::TestEncoderLookback;
            break;
        case Variant::UnsharedW1W2: base.shared_generator = false; break;
        default: break;
    }
    return base;
}

std::vector<std::string> strategy_tokens() {
    std::vector<std::string> out;
    for (const auto& s : kStrategies) out.emplace_back(s.token);
    return out;
}

// ---- pretraining ---------------------------------------------------------------

double evaluate_mse(const models::ForecastModel& model, std::span<const data::WindowSample> windows) {
    if (windows.empty()) return 0.0;
    constexpr std::size_t kChunk = 256;
    const int n = model.dims().n_variates;
    double total = 0.0;
    for (std::size_t at = 0; at < windows.size(); at += kChunk) {
        const auto part = windows.subspan(at, std::min(kChunk, windows.size() - at));
        const auto fwd = models::forward_batch(model, inputs_of(part));
        for (std::size_t j = 0; j < part.size(); ++j) total += nn::mse(fwd.item(j, n), part[j].y);
    }
    return total / static_cast<double>(windows.size());
}

PretrainRecord pretrain(models::ForecastModel& model, std::span<const data::WindowSample> train,
                        std::span<const data::WindowSample> valid, const PretrainConfig& cfg) {
    PretrainRecord rec;
    if (cfg.epochs <= 0) return rec;
    if (train.empty()) throw EmptyRange();
    if (cfg.batch < 1) throw BadValue("batch", "must be positive");

    std::mt19937_64 rng(mix(cfg.seed, 11));
    nn::Adam adam({&model.params()}, nn::AdamConfig{cfg.lr});
    models::ParamSnapshot best = models::clone_params(model);
    rec.best_valid_mse = std::numeric_limits<double>::infinity();
    int stale = 0;
    const auto b = static_cast<std::size_t>(cfg.batch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled(train.size(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += b) {
            const auto batch = gather(train, order, at, std::min(order.size(), at + b));
            sum += plain_loss_and_grad(model, batch);
            adam.step();
            ++batches;
        }
        rec.train_mse.push_back(sum / static_cast<double>(batches));
        const double v = valid.empty() ? evaluate_mse(model, train) : evaluate_mse(model, valid);
        check_finite(v, "validation");
        rec.valid_mse.push_back(v);
        if (v < rec.best_valid_mse) {
            rec.best_valid_mse = v;
            rec.best_epoch = epoch;
            best = models::clone_params(model);
            stale = 0;
        } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
            break;
        }
    }
    models::restore_params(model, best);
    return rec;
}

// ---- adapter training ----------------------------------------------------------

double evaluate_adapted(const models::ForecastModel& model, const adapt::DriftAdapter& adapter,
                        std::span<const data::WindowSample> windows, int batch) {
    if (windows.empty()) return 0.0;
    const auto b = static_cast<std::size_t>(std::max(batch, 1));
    double total = 0.0;
    std::span<const data::WindowSample> prev;
    for (std::size_t at = 0; at < windows.size(); at += b) {
        const auto cur = windows.subspan(at, std::min(b, windows.size() - at));
        total += adapt::joint_loss(model, adapter, prev, cur) * static_cast<double>(cur.size());
        prev = cur;
    }
    return total / static_cast<double>(windows.size());
}

AdapterTrainRecord train_adapter(models::ForecastModel& model, adapt::DriftAdapter& adapter,
                                 std::span<const data::WindowSample> train,
                                 std::span<const data::WindowSample> valid, const AdapterTrainConfig& cfg) {
    AdapterTrainRecord rec;
    if (cfg.epochs <= 0) return rec;
    if (train.empty()) throw EmptyRange();
    if (cfg.batch < 1) throw BadValue("batch", "must be positive");

    std::mt19937_64 rng(mix(cfg.seed, 23));
    auto stores = adapter.trainable_stores();
    stores.insert(stores.begin(), &model.params());
    nn::Adam adam(stores, nn::AdamConfig{cfg.lr});

    const auto b = static_cast<std::size_t>(cfg.batch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled(train.size(), rng);
        std::vector<data::WindowSample> prev;
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += b) {
            auto cur = gather(train, order, at, std::min(order.size(), at + b));
            const double loss = adapt::joint_loss_and_grad(model, adapter, prev, cur);
            check_finite(loss, "adapter training");
            adam.step();
            sum += loss;
            ++batches;
            prev = std::move(cur);
        }
        rec.train_mse.push_back(sum / static_cast<double>(batches));
        if (!valid.empty()) {
            const double v = evaluate_adapted(model, adapter, valid, cfg.batch);
            check_finite(v, "adapter validation");
            rec.valid_mse.push_back(v);
        }
    }
    return rec;
}

// ---- online ----------------------------------------------------------------------

namespace {

struct Pending {
    std::int64_t origin;
    Matrix forecast;
};

}  // namespace

OnlineResult run_online(models::ForecastModel& model, const adapt::DriftAdapter* adapter,
                        const data::SeriesFrame& frame, const OnlineConfig& cfg, const OnlineObserver* observer) {
    const Strategy& st = cfg.strategy;
    if (st.uses_adapter() != (adapter != nullptr))
        throw StrategyArgMismatch(st.uses_adapter() ? "strategy " + st.token() + " needs an adapter"
                                                    : "strategy " + st.token() + " takes no adapter");
    const int L = cfg.lookback;
    const int H = cfg.horizon;
    if (L != model.dims().lookback || H != model.dims().horizon) throw ShapeMismatch("online window dims");
    if (cfg.begin - H - 1 < L || cfg.end > frame.n_steps() - H || cfg.begin > cfg.end)
        throw DegenerateSplit("online range [" + std::to_string(cfg.begin) + ", " + std::to_string(cfg.end) +
                              "] leaves no room for lookback and horizon");

    OnlineResult res;
    auto stream = data::guarded_view(frame, cfg.begin, st.oracle());
    nn::Adam adam({&model.params()}, nn::AdamConfig{cfg.online_lr});
    const bool proceed = st.uses_adapter();
    if (adapter != nullptr) res.adapter_checksum_before = adapter->checksum();

    // Concept of the most recent labeled sample; cold start from the last
    // window that lies fully before the online range.
    adapt::ConceptVector c_prev;
    if (proceed) c_prev = adapter->train_concept(stream.sample(cfg.begin - H - 1, L, H));

    std::deque<Pending> pending;
    double sum_mse = 0.0;
    double sum_mae = 0.0;
    const auto score_ready = [&](std::int64_t clock) {
        while (!pending.empty() && pending.front().origin + H <= clock) {
            const auto& p = pending.front();
            const Matrix y = stream.read_range(p.origin + 1, p.origin + H);
            const double m = nn::mse(p.forecast, y);
            sum_mse += m;
            sum_mae += nn::mae(p.forecast, y);
            ++res.n_scored;
            if (cfg.record_trace) res.trace.push_back({p.origin, m});
            pending.pop_front();
        }
    };

    for (std::int64_t t = cfg.begin; t <= cfg.end; ++t) {
        stream.advance_to(t);

        // feedback
        if (st.kind != StrategyKind::Frozen) {
            const std::int64_t origin = st.oracle() ? t - 1 : t - H;
            const auto s = stream.sample(origin, L, H);
            const data::WindowSample one[1] = {s};
            if (proceed && cfg.feedback_through_adapter) {
                const auto u = adapter->generator_input(c_prev, adapter->test_concept(s.x));
                const adapt::AdaptationCoefficients coeffs[1] = {adapter->coefficients(u, model.registry())};
                const auto mod = adapt::build_modulation(model, coeffs);
                check_finite(plain_loss_and_grad(model, one, &mod), "online update");
            } else {
                check_finite(plain_loss_and_grad(model, one), "online update");
            }
            adam.step();
            if (proceed) c_prev = adapter->train_concept(s);
            if (observer != nullptr && observer->on_feedback) observer->on_feedback(t, origin);
        }

        // forecast
        const Matrix x = stream.lookback(t, L);
        const std::uint64_t before = observer != nullptr ? model.params().checksum() : 0;
        Matrix yhat;
        if (proceed) {
            const auto u = adapter->generator_input(c_prev, adapter->test_concept(x));
            const adapt::AdaptationCoefficients coeffs[1] = {adapter->coefficients(u, model.registry())};
            const Matrix xs[1] = {x};
            yhat = adapt::adapted_forward(model, coeffs, xs).front();
        } else {
            yhat = model.forecast(x);
        }
        if (observer != nullptr && observer->on_forecast) observer->on_forecast(t, before, model.params().checksum());
        if (t >= cfg.eval_begin) pending.push_back({t, std::move(yhat)});
        score_ready(t);
    }
    stream.advance_to(std::min(cfg.end + H, frame.n_steps()));
    score_ready(stream.clock());

    if (res.n_scored > 0) {
        res.mse = sum_mse / static_cast<double>(res.n_scored);
        res.mae = sum_mae / static_cast<double>(res.n_scored);
    }
    res.audit.oracle_reads = stream.oracle_reads();
    if (adapter != nullptr) res.adapter_checksum_after = adapter->checksum();
    return res;
}

std::vector<DriftRow> export_drift(const adapt::DriftAdapter& adapter, const data::SeriesFrame& frame, int lookback,
                                   int horizon, std::int64_t begin, std::int64_t end) {
    if (begin - horizon < lookback || end > frame.n_steps() || begin > end)
        throw DegenerateSplit("export range leaves no room for lookback and horizon");
    auto stream = data::guarded_view(frame, begin, false);
    std::vector<DriftRow> rows;
    rows.reserve(static_cast<std::size_t>(end - begin + 1) * 3);
    for (std::int64_t t = begin; t <= end; ++t) {
        stream.advance_to(t);
        const auto c_train = adapter.train_concept(stream.sample(t - horizon, lookback, horizon));
        const auto c_test = adapter.test_concept(stream.lookback(t, lookback));
        const auto drift = adapt::estimate_drift(c_test, c_train);
        rows.push_back({t, "concept_train", c_train.values});
        rows.push_back({t, "concept_test", c_test.values});
        rows.push_back({t, "drift", drift.values});
    }
    return rows;
}

// ---- reports ---------------------------------------------------------------------

nlohmann::ordered_json RunReport::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["model"] = model;
    j["strategy"] = strategy;
    j["variant"] = variant;
    j["L"] = lookback;
    j["H"] = horizon;
    j["seed"] = seed;
    j["mse"] = mse;
    j["mae"] = mae;
    j["n_scored"] = n_scored;
    if (delta_mse) j["delta_mse"] = *delta_mse;
    if (delta_mae) j["delta_mae"] = *delta_mae;
    j["leakage_audit"] = {{"violations", leakage_audit.violations}, {"oracle_reads", leakage_audit.oracle_reads}};
    j["adapter_param_count"] = adapter_param_count;
    j["naive_param_count"] = naive_param_count;
    j["encoder_param_count"] = encoder_param_count;
    j["config"] = config;
    if (!trace.empty()) {
        auto& arr = j["trace"] = nlohmann::ordered_json::array();
        for (const auto& p : trace) arr.push_back({p.t, p.loss});
    }
    return j;
}

RunReport RunReport::from_json(const nlohmann::ordered_json& j) {
    RunReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.lookback = j.at("L").get<int>();
    r.horizon = j.at("H").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mse = j.at("mse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.n_scored = j.value("n_scored", std::int64_t{0});
    if (j.contains("delta_mse")) r.delta_mse = j["delta_mse"].get<double>();
    if (j.contains("delta_mae")) r.delta_mae = j["delta_mae"].get<double>();
    const auto& a = j.at("leakage_audit");
    r.leakage_audit = {a.at("violations").get<std::int64_t>(), a.at("oracle_reads").get<std::int64_t>()};
    r.adapter_param_count = j.value("adapter_param_count", std::int64_t{0});
    r.naive_param_count = j.value("naive_param_count", std::int64_t{0});
    r.encoder_param_count = j.value("encoder_param_count", std::int64_t{0});
    if (j.contains("config")) r.config = j["config"];
    if (j.contains("trace"))
        for (const auto& p : j["trace"]) r.trace.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<double>()});
    return r;
}

double gap_percent(double practical, double optimal) {
    if (optimal == 0.0) throw ZeroDenominator();
    return (practical - optimal) / optimal * 100.0;
}

Gap compute_gap(const RunReport& practical, const RunReport& optimal) {
    const auto differ = [](const char* what) { throw ConfigMismatch(std::string(what) + " differs"); };
    if (practical.dataset != optimal.dataset) differ("dataset");
    if (practical.model != optimal.model) differ("model");
    if (practical.lookback != optimal.lookback) differ("lookback");
    if (practical.horizon != optimal.horizon) differ("horizon");
    if (practical.seed != optimal.seed) differ("seed");
    return {gap_percent(practical.mse, optimal.mse), gap_percent(practical.mae, optimal.mae)};
}

// ---- cells -------------------------------------------------------------------------

nlohmann::ordered_json CellConfig::to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["model"] = {{"kind", models::to_string(model.kind)}, {"hidden", model.hidden}, {"revin", model.revin}};
    j["L"] = lookback;
    j["H"] = horizon;
    j["strategy"] = strategy.token();
    j["seed"] = seed;
    j["pretrain"] = {{"lr", pretrain.lr}, {"epochs", pretrain.epochs}, {"batch", pretrain.batch},
                     {"patience", pretrain.patience}};
    j["adapter_train"] = {{"lr", adapter_train.lr}, {"epochs", adapter_train.epochs},
                          {"batch", adapter_train.batch}};
    const auto a = strategy.adapter_config(adapter);
    j["adapter"] = {{"concept_dim", a.concept_dim},
                    {"rank", a.rank},
                    {"aggregation", adapt::to_string(a.aggregation)},
                    {"shared_generator", a.shared_generator},
                    {"input", a.input == adapt::GeneratorInput::Drift ? "drift" : "test_concept"},
                    {"train_concept", a.train_concept == adapt::TrainConceptSource::TrainEncoderXY ? "e" : "e_prime"},
                    {"prev_batch", a.prev_batch == adapt::TrainConceptSource::TrainEncoderXY ? "e" : "e_prime"}};
    j["online_lr"] = online_lr > 0.0 ? online_lr : pretrain.lr * 0.1;
    j["feedback_through_adapter"] = feedback_through_adapter;
    j["adam"] = {{"beta1", nn::AdamConfig{}.beta1}, {"beta2", nn::AdamConfig{}.beta2}, {"eps", nn::AdamConfig{}.eps}};
    return j;
}

PreparedData prepare(const data::SeriesFrame& raw, const data::SplitRatios& ratios, bool standardize) {
    const auto split = data::chronological_split(raw, ratios);
    if (!standardize) return {raw, split};
    return {data::standardize(raw, 1, split.train_end).first, split};
}

WindowSets offline_windows(const PreparedData& data, int lookback, int horizon) {
    WindowSets w;
    w.train = data::make_windows(data.frame, lookback, horizon, lookback, data.split.train_end - horizon);
    try {
        w.valid = data::make_windows(data.frame, lookback, horizon, data.split.train_end,
                                     data.split.valid_end - horizon);
    } catch (const EmptyRange&) {
        w.valid.clear();
    }
    return w;
}

OnlineConfig online_range(const PreparedData& data, const CellConfig& cell) {
    OnlineConfig o;
    o.strategy = cell.strategy;
    o.lookback = cell.lookback;
    o.horizon = cell.horizon;
    o.online_lr = cell.online_lr > 0.0 ? cell.online_lr : cell.pretrain.lr * 0.1;
    o.feedback_through_adapter = cell.feedback_through_adapter;
    o.begin = data.split.train_end + 1;
    o.eval_begin = data.split.valid_end;
    o.end = data.frame.n_steps() - cell.horizon;
    o.record_trace = cell.record_trace;
    return o;
}

models::ForecastModel build_model(const ModelChoice& choice, int n_variates, int lookback, int horizon,
                                  std::uint64_t seed) {
    if (choice.kind == models::ModelKind::Linear)
        return models::build_linear(n_variates, lookback, horizon, choice.revin, seed);
    return models::build_mlp(n_variates, lookback, horizon, choice.hidden, choice.revin, seed);
}

TrainedModels pretrain_cell(const PreparedData& data, const CellConfig& cell) {
    TrainedModels out;
    out.pretrained = build_model(cell.model, static_cast<int>(data.frame.n_variates()), cell.lookback,
                                 cell.horizon, mix(cell.seed, 1));
    const auto w = offline_windows(data, cell.lookback, cell.horizon);
    auto cfg = cell.pretrain;
    cfg.seed = mix(cell.seed, 2);
    out.pretrain_record = pretrain(*out.pretrained, w.train, w.valid, cfg);
    return out;
}

TrainedCell train_cell(const PreparedData& data, const CellConfig& cell, const models::ForecastModel* pretrained) {
    TrainedCell out{pretrained != nullptr ? *pretrained : std::move(*pretrain_cell(data, cell).pretrained), {}, {}};
    if (cell.strategy.uses_adapter()) {
        out.adapter.emplace(out.model, cell.strategy.adapter_config(cell.adapter), mix(cell.seed, 3));
        const auto w = offline_windows(data, cell.lookback, cell.horizon);
        auto cfg = cell.adapter_train;
        cfg.seed = mix(cell.seed, 4);
        out.adapter_record = train_adapter(out.model, *out.adapter, w.train, w.valid, cfg);
    }
    return out;
}

RunReport evaluate_cell(const PreparedData& data, const CellConfig& cell, TrainedCell& trained) {
    const auto online = online_range(data, cell);
    const auto res =
        run_online(trained.model, trained.adapter ? &*trained.adapter : nullptr, data.frame, online);

    RunReport r;
    r.dataset = cell.dataset;
    r.model = models::to_string(cell.model.kind);
    r.strategy = cell.strategy.strategy_name();
    r.variant = cell.strategy.variant_name();
    r.lookback = cell.lookback;
    r.horizon = cell.horizon;
    r.seed = cell.seed;
    r.mse = res.mse;
    r.mae = res.mae;
    r.n_scored = res.n_scored;
    r.leakage_audit = res.audit;
    const auto adapter_cfg = cell.strategy.adapter_config(cell.adapter);
    const auto& registry = trained.model.registry();
    if (trained.adapter) {
        r.adapter_param_count = adapt::adapter_param_count(trained.adapter->generator(), registry);
        r.encoder_param_count = trained.adapter->encoder_param_count();
    } else {
        const adapt::CoeffGenerator gen(registry, adapter_cfg.concept_dim, adapter_cfg.rank,
                                        adapter_cfg.shared_generator, 0);
        r.adapter_param_count = adapt::adapter_param_count(gen, registry);
    }
    r.naive_param_count = adapt::naive_dense_param_count(registry, adapter_cfg.concept_dim);
    r.config = cell.to_json();
    r.trace = res.trace;
    return r;
}

RunReport run_cell(const PreparedData& data, const CellConfig& cell, const models::ForecastModel* pretrained) {
    auto trained = train_cell(data, cell, pretrained);
    return evaluate_cell(data, cell, trained);
}

RunReport run_variant(Variant variant, const PreparedData& data, CellConfig cell,
                      const models::ForecastModel* pretrained) {
    cell.strategy = {StrategyKind::Proceed, variant};
    return run_cell(data, cell, pretrained);
}

}  // namespace driftcast::engine
