#include "driftcast/config.hpp"

#include "driftcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace driftcast::cli {

namespace {

struct Value {
    enum class Kind { Number, Bool, String, Array } kind = Kind::Number;
    double number = 0.0;
    bool flag = false;
    std::string text;
    std::vector<Value> items;
};

class LineParser {
public:
    LineParser(const std::string& s, std::size_t line) : s_(s), line_(line) {}

    Value value() {
        skip_ws();
        if (at_end()) fail("missing value");
        const char c = s_[pos_];
        if (c == '"') return string_value();
        if (c == '[') return array_value();
        if (s_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            Value v;
            v.kind = Value::Kind::Bool;
            v.flag = true;
            return v;
        }
        if (s_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            Value v;
            v.kind = Value::Kind::Bool;
            return v;
        }
        return number_value();
    }

    void finish() {
        skip_ws();
        if (!at_end() && s_[pos_] != '#') fail("unexpected text after value");
    }

private:
    [[noreturn]] void fail(const std::string& why) const { throw ParseError(line_, why); }
    bool at_end() const { return pos_ >= s_.size(); }
    void skip_ws() {
        while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    Value string_value() {
        Value v;
        v.kind = Value::Kind::String;
        ++pos_;
        while (true) {
            if (at_end()) fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (at_end()) fail("unterminated escape");
                const char e = s_[pos_++];
                if (e == 'n') v.text += '\n';
                else if (e == 't') v.text += '\t';
                else if (e == '"' || e == '\\') v.text += e;
                else fail(std::string("unknown escape \\") + e);
            } else {
                v.text += c;
            }
        }
        return v;
    }

    Value array_value() {
        Value v;
        v.kind = Value::Kind::Array;
        ++pos_;
        skip_ws();
        if (!at_end() && s_[pos_] == ']') {
            ++pos_;
            return v;
        }
        while (true) {
            v.items.push_back(value());
            skip_ws();
            if (at_end()) fail("unterminated array");
            if (s_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                return v;
            }
            fail("expected ',' or ']' in array");
        }
    }

    Value number_value() {
        Value v;
        const char* begin = s_.data() + pos_;
        const char* end = s_.data() + s_.size();
        const auto res = std::from_chars(begin, end, v.number);
        if (res.ec != std::errc{} || res.ptr == begin) fail("cannot parse value");
        if (!std::isfinite(v.number)) fail("non-finite number");
        v.text.assign(begin, res.ptr);
        pos_ += static_cast<std::size_t>(res.ptr - begin);
        return v;
    }

    const std::string& s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// ---- typed accessors ---------------------------------------------------------

double as_number(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::Number) throw BadValue(key, "expected a number");
    return v.number;
}

std::int64_t as_int(const std::string& key, const Value& v) {
    const double d = as_number(key, v);
    if (std::floor(d) != d || std::abs(d) > 9.0e15) throw BadValue(key, "expected an integer");
    return static_cast<std::int64_t>(d);
}

int as_positive(const std::string& key, const Value& v) {
    const auto i = as_int(key, v);
    if (i < 1 || i > 1000000000) throw BadValue(key, "expected a positive integer");
    return static_cast<int>(i);
}

int as_nonnegative(const std::string& key, const Value& v) {
    const auto i = as_int(key, v);
    if (i < 0 || i > 1000000000) throw BadValue(key, "expected a nonnegative integer");
    return static_cast<int>(i);
}

double as_positive_real(const std::string& key, const Value& v) {
    const double d = as_number(key, v);
    if (!(d > 0.0)) throw BadValue(key, "expected a positive number");
    return d;
}

bool as_bool(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::Bool) throw BadValue(key, "expected true or false");
    return v.flag;
}

std::string as_string(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::String) throw BadValue(key, "expected a quoted string");
    return v.text;
}

const std::vector<Value>& as_array(const std::string& key, const Value& v) {
    if (v.kind != Value::Kind::Array) throw BadValue(key, "expected an array");
    return v.items;
}

std::string choice(const std::string& key, const Value& v, std::initializer_list<const char*> allowed) {
    const auto s = as_string(key, v);
    for (const char* a : allowed)
        if (s == a) return s;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    throw BadValue(key, "'" + s + "' is not one of " + list);
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        if (c == '\t') {
            out += "\\t";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Value&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"data.source", [](auto& c, auto& k, auto& v) { c.source = choice(k, v, {"synthetic", "csv"}); }},
        {"data.path", [](auto& c, auto& k, auto& v) { c.path = as_string(k, v); }},
        {"data.name", [](auto& c, auto& k, auto& v) { c.name = as_string(k, v); }},
        {"data.standardize", [](auto& c, auto& k, auto& v) { c.standardize = as_bool(k, v); }},
        {"data.split",
         [](auto& c, auto& k, auto& v) {
             const auto& a = as_array(k, v);
             if (a.size() != 3) throw BadValue(k, "expected three ratios");
             data::SplitRatios r{as_number(k, a[0]), as_number(k, a[1]), as_number(k, a[2])};
             if (r.train < 0 || r.valid < 0 || r.test < 0 || r.train + r.valid + r.test <= 0)
                 throw BadValue(k, "ratios must be nonnegative with a positive sum");
             c.split = r;
         }},
        {"synthetic.n_variates", [](auto& c, auto& k, auto& v) { c.synthetic.n_variates = as_positive(k, v); }},
        {"synthetic.n_steps", [](auto& c, auto& k, auto& v) { c.synthetic.n_steps = as_positive(k, v); }},
        {"synthetic.seed",
         [](auto& c, auto& k, auto& v) { c.synthetic.seed = static_cast<std::uint64_t>(as_nonnegative(k, v)); }},
        {"synthetic.segment_length",
         [](auto& c, auto& k, auto& v) { c.synthetic.segment_length = as_positive(k, v); }},
        {"synthetic.jitter", [](auto& c, auto& k, auto& v) { c.synthetic.jitter = as_nonnegative(k, v); }},
        {"synthetic.regimes",
         [](auto& c, auto& k, auto& v) {
             std::vector<data::Regime> out;
             for (const auto& item : as_array(k, v)) {
                 const auto& f = as_array(k, item);
                 if (f.size() != 6) throw BadValue(k, "each regime is [ar1, ar2, amplitude, period, noise, level]");
                 data::Regime r{as_number(k, f[0]), as_number(k, f[1]), as_number(k, f[2]),
                                as_number(k, f[3]), as_number(k, f[4]), as_number(k, f[5])};
                 if (r.period <= 0.0 || r.noise < 0.0) throw BadValue(k, "period must be positive, noise >= 0");
                 out.push_back(r);
             }
             c.synthetic.regimes = std::move(out);
         }},
        {"model.kind",
         [](auto& c, auto& k, auto& v) {
             c.model = choice(k, v, {"linear", "mlp"}) == "linear" ? models::ModelKind::Linear : models::ModelKind::Mlp;
         }},
        {"model.hidden", [](auto& c, auto& k, auto& v) { c.hidden = as_positive(k, v); }},
        {"model.revin", [](auto& c, auto& k, auto& v) { c.revin = as_bool(k, v); }},
        {"lookback", [](auto& c, auto& k, auto& v) { c.lookback = as_positive(k, v); }},
        {"horizon",
         [](auto& c, auto& k, auto& v) {
             std::vector<int> hs;
             if (v.kind == Value::Kind::Array) {
                 for (const auto& item : v.items) hs.push_back(as_positive(k, item));
             } else {
                 hs.push_back(as_positive(k, v));
             }
             if (hs.empty()) throw BadValue(k, "at least one horizon is required");
             c.horizons = std::move(hs);
         }},
        {"strategy",
         [](auto& c, auto& k, auto& v) {
             std::vector<engine::Strategy> out;
             const auto add = [&](const Value& item) {
                 const auto s = as_string(k, item);
                 try {
                     out.push_back(engine::Strategy::parse(s));
                 } catch (const BadValue&) {
                     throw BadValue(k, "unknown strategy '" + s + "'");
                 }
             };
             if (v.kind == Value::Kind::Array) {
                 for (const auto& item : v.items) add(item);
             } else {
                 add(v);
             }
             if (out.empty()) throw BadValue(k, "at least one strategy is required");
             c.strategies = std::move(out);
         }},
        {"seeds",
         [](auto& c, auto& k, auto& v) {
             std::vector<std::uint64_t> out;
             for (const auto& item : as_array(k, v)) out.push_back(static_cast<std::uint64_t>(as_nonnegative(k, item)));
             if (out.empty()) throw BadValue(k, "at least one seed is required");
             c.seeds = std::move(out);
         }},
        {"output_dir", [](auto& c, auto& k, auto& v) { c.output_dir = as_string(k, v); }},
        {"pretrain.lr", [](auto& c, auto& k, auto& v) { c.pretrain.lr = as_positive_real(k, v); }},
        {"pretrain.epochs", [](auto& c, auto& k, auto& v) { c.pretrain.epochs = as_nonnegative(k, v); }},
        {"pretrain.batch", [](auto& c, auto& k, auto& v) { c.pretrain.batch = as_positive(k, v); }},
        {"pretrain.patience", [](auto& c, auto& k, auto& v) { c.pretrain.patience = as_nonnegative(k, v); }},
        {"adapter.concept_dim", [](auto& c, auto& k, auto& v) { c.adapter.concept_dim = as_positive(k, v); }},
        {"adapter.rank", [](auto& c, auto& k, auto& v) { c.adapter.rank = as_positive(k, v); }},
        {"adapter.aggregation",
         [](auto& c, auto& k, auto& v) {
             c.adapter.aggregation = adapt::aggregation_from_string(choice(k, v, {"average", "linear", "weighted"}));
         }},
        {"adapter.prev_batch_encoder",
         [](auto& c, auto& k, auto& v) {
             c.adapter.prev_batch = choice(k, v, {"e", "e_prime"}) == "e"
                                        ? adapt::TrainConceptSource::TrainEncoderXY
                                        : adapt::TrainConceptSource::TestEncoderLookback;
         }},
        {"adapter.lr", [](auto& c, auto& k, auto& v) { c.adapter_train.lr = as_positive_real(k, v); }},
        {"adapter.epochs", [](auto& c, auto& k, auto& v) { c.adapter_train.epochs = as_nonnegative(k, v); }},
        {"adapter.batch", [](auto& c, auto& k, auto& v) { c.adapter_train.batch = as_positive(k, v); }},
        {"online.lr",
         [](auto& c, auto& k, auto& v) {
             const double d = as_number(k, v);
             if (d < 0.0) throw BadValue(k, "must be >= 0 (0 derives it from pretrain.lr)");
             c.online_lr = d;
         }},
        {"online.feedback_through_adapter",
         [](auto& c, auto& k, auto& v) { c.feedback_through_adapter = as_bool(k, v); }},
        {"online.trace", [](auto& c, auto& k, auto& v) { c.trace = as_bool(k, v); }},
    };
    return table;
}

}  // namespace

std::string ExperimentConfig::dataset_name() const {
    if (!name.empty()) return name;
    if (source == "csv") return std::filesystem::path(path).stem().string();
    return "synthetic";
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[' && line.find('=') == std::string::npos) {
            const auto close = line.find(']');
            if (close == std::string::npos) throw ParseError(line_no, "unterminated section header");
            const std::string rest = trim(line.substr(close + 1));
            if (!rest.empty() && rest.front() != '#') throw ParseError(line_no, "text after section header");
            section = trim(line.substr(1, close - 1));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string bare = trim(line.substr(0, eq));
        if (bare.empty() || bare.find_first_of(" \t\"[]") != std::string::npos)
            throw ParseError(line_no, "bad key '" + bare + "'");
        const std::string key = section.empty() ? bare : section + "." + bare;
        const std::string rhs = line.substr(eq + 1);
        LineParser p(rhs, line_no);
        const Value v = p.value();
        p.finish();
        const auto& table = setters();
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
        if (it == table.end()) throw UnknownKey(key);
        if (const auto prev = seen.find(key); prev != seen.end())
            throw ParseError(line_no, "duplicate key '" + key + "' (first at line " + std::to_string(prev->second) + ")");
        seen.emplace(key, line_no);
        it->second(cfg, key, v);
    }
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path.string());
    return parse_config(in);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    const auto list = [](const auto& items, const auto& fmt) {
        std::string s = "[";
        for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + fmt(items[i]);
        return s + "]";
    };
    o << "lookback = " << c.lookback << '\n';
    o << "horizon = " << list(c.horizons, [](int h) { return std::to_string(h); }) << '\n';
    o << "strategy = " << list(c.strategies, [](const engine::Strategy& s) { return quote(s.token()); }) << '\n';
    o << "seeds = " << list(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
    o << "output_dir = " << quote(c.output_dir) << '\n';
    o << "\n[data]\n";
    o << "source = " << quote(c.source) << '\n';
    o << "path = " << quote(c.path) << '\n';
    o << "name = " << quote(c.name) << '\n';
    o << "standardize = " << (c.standardize ? "true" : "false") << '\n';
    o << "split = [" << format_double(c.split.train) << ", " << format_double(c.split.valid) << ", "
      << format_double(c.split.test) << "]\n";
    o << "\n[synthetic]\n";
    o << "n_variates = " << c.synthetic.n_variates << '\n';
    o << "n_steps = " << c.synthetic.n_steps << '\n';
    o << "seed = " << c.synthetic.seed << '\n';
    o << "segment_length = " << c.synthetic.segment_length << '\n';
    o << "jitter = " << c.synthetic.jitter << '\n';
    o << "regimes = "
      << list(c.synthetic.regimes,
              [](const data::Regime& r) {
                  return "[" + format_double(r.ar1) + ", " + format_double(r.ar2) + ", " +
                         format_double(r.amplitude) + ", " + format_double(r.period) + ", " +
                         format_double(r.noise) + ", " + format_double(r.level) + "]";
              })
      << '\n';
    o << "\n[model]\n";
    o << "kind = " << quote(models::to_string(c.model)) << '\n';
    o << "hidden = " << c.hidden << '\n';
    o << "revin = " << (c.revin ? "true" : "false") << '\n';
    o << "\n[pretrain]\n";
    o << "lr = " << format_double(c.pretrain.lr) << '\n';
    o << "epochs = " << c.pretrain.epochs << '\n';
    o << "batch = " << c.pretrain.batch << '\n';
    o << "patience = " << c.pretrain.patience << '\n';
    o << "\n[adapter]\n";
    o << "concept_dim = " << c.adapter.concept_dim << '\n';
    o << "rank = " << c.adapter.rank << '\n';
    o << "aggregation = " << quote(adapt::to_string(c.adapter.aggregation)) << '\n';
    o << "prev_batch_encoder = "
      << quote(c.adapter.prev_batch == adapt::TrainConceptSource::TrainEncoderXY ? "e" : "e_prime") << '\n';
    o << "lr = " << format_double(c.adapter_train.lr) << '\n';
    o << "epochs = " << c.adapter_train.epochs << '\n';
    o << "batch = " << c.adapter_train.batch << '\n';
    o << "\n[online]\n";
    o << "lr = " << format_double(c.online_lr) << '\n';
    o << "feedback_through_adapter = " << (c.feedback_through_adapter ? "true" : "false") << '\n';
    o << "trace = " << (c.trace ? "true" : "false") << '\n';
    return o.str();
}

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

data::SyntheticSpec synthetic_spec(const ExperimentConfig& cfg) {
    const auto& s = cfg.synthetic;
    data::SyntheticSpec spec = data::default_synthetic_spec(s.seed);
    spec.n_variates = s.n_variates;
    spec.n_steps = s.n_steps;
    if (!s.regimes.empty()) spec.regimes = s.regimes;
    spec.schedule = data::recurring_schedule(s.n_steps, static_cast<int>(spec.regimes.size()), s.segment_length,
                                             s.jitter, s.seed);
    return spec;
}

engine::PreparedData load_data(const ExperimentConfig& cfg) {
    data::SeriesFrame raw;
    if (cfg.source == "csv") {
        if (cfg.path.empty()) throw BadValue("data.path", "required when data.source = \"csv\"");
        raw = data::load_csv(cfg.path);
    } else {
        raw = data::generate_synthetic(synthetic_spec(cfg)).frame;
    }
    return engine::prepare(raw, cfg.split, cfg.standardize);
}

engine::CellConfig cell_config(const ExperimentConfig& cfg, int horizon, const engine::Strategy& strategy,
                               std::uint64_t seed) {
    engine::CellConfig cell;
    cell.dataset = cfg.dataset_name();
    cell.model = {cfg.model, cfg.hidden, cfg.revin};
    cell.lookback = cfg.lookback;
    cell.horizon = horizon;
    cell.strategy = strategy;
    cell.seed = seed;
    cell.pretrain = cfg.pretrain;
    cell.adapter_train = cfg.adapter_train;
    cell.adapter = cfg.adapter;
    cell.online_lr = cfg.online_lr;
    cell.feedback_through_adapter = cfg.feedback_through_adapter;
    cell.record_trace = cfg.trace;
    return cell;
}

std::string cell_stem(const std::string& dataset, const std::string& model, const std::string& strategy,
                      const std::string& variant, int horizon, std::uint64_t seed) {
    return dataset + "_" + model + "_" + strategy + "_" + variant + "_H" + std::to_string(horizon) + "_seed" +
           std::to_string(seed);
}

}  // namespace driftcast::cli
