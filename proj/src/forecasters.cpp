#include "driftcast/forecasters.hpp"

#include "driftcast/errors.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

namespace driftcast::models {

namespace {

std::string str(int v) { return std::to_string(v); }

int to_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw WiringMismatch("bad integer for " + what + ": '" + s + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
}

}  // namespace

LayerTypeRegistry LayerTypeRegistry::from_store(const nn::ParamStore& store) {
    LayerTypeRegistry reg;
    int max_id = -1;
    for (const auto& t : store.tensors()) {
        if (t.layer_type_id < 0) throw RegistryMismatch("negative layer type id on " + t.name);
        max_id = std::max(max_id, t.layer_type_id);
    }
    reg.entries_.resize(static_cast<std::size_t>(max_id + 1));
    std::vector<bool> seen(reg.entries_.size(), false);
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& t = store[i];
        auto& e = reg.entries_[static_cast<std::size_t>(t.layer_type_id)];
        if (!seen[static_cast<std::size_t>(t.layer_type_id)]) {
            e.id = t.layer_type_id;
            e.shape = t.shape;
            seen[static_cast<std::size_t>(t.layer_type_id)] = true;
        } else if (!(e.shape == t.shape)) {
            throw RegistryMismatch("layer type " + str(t.layer_type_id) + " mixes shapes (" + t.name + ")");
        }
        e.members.push_back(static_cast<int>(i));
        reg.type_of_.push_back(t.layer_type_id);
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k]) throw RegistryMismatch("layer type ids are not dense (missing " + std::to_string(k) + ")");
    return reg;
}

void assign_layer_types(nn::ParamStore& store) {
    std::map<std::tuple<int, int, int, int>, int> ids;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& s = store[i].shape;
        const auto key = std::make_tuple(static_cast<int>(s.kind), s.d_in, s.d_out, s.d_k);
        const auto it = ids.find(key);
        const int id = it != ids.end() ? it->second : static_cast<int>(ids.size());
        if (it == ids.end()) ids.emplace(key, id);
        store.mutate(i).layer_type_id = id;
    }
}

const char* to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Custom: return "custom";
    }
    return "?";
}

ForecastModel::ForecastModel(nn::Network net, ModelDims dims, bool revin, ModelKind kind, int hidden)
    : net_(std::move(net)), dims_(dims), revin_(revin), kind_(kind), hidden_(hidden),
      registry_(LayerTypeRegistry::from_store(net_.params())) {
    if (dims_.n_variates < 1 || dims_.lookback < 1 || dims_.horizon < 1)
        throw ShapeMismatch("model dims");
    if (net_.input_dim() != dims_.lookback) throw ShapeMismatch("model input");
    if (net_.output_dim() != dims_.horizon) throw ShapeMismatch("model output");
}

Matrix ForecastModel::forecast(const Matrix& x) const {
    const Matrix items[1] = {x};
    return forward_batch(*this, items).output;
}

ForecastModel build_linear(int n_variates, int lookback, int horizon, bool revin, std::uint64_t seed) {
    nn::ParamStore store;
    std::mt19937_64 rng(seed);
    nn::ParamTensor w("linear.weight", nn::ParamShape::linear(lookback, horizon), 0);
    nn::init_default(w, rng);
    const int wi = store.add(std::move(w));
    const int bi = store.add(nn::ParamTensor("linear.bias", nn::ParamShape::bias(horizon), 1));
    assign_layer_types(store);
    nn::Wiring wiring{lookback, {nn::LinearOp{wi}, nn::BiasOp{bi}}};
    return ForecastModel(nn::Network(std::move(store), std::move(wiring)),
                         {n_variates, lookback, horizon}, revin, ModelKind::Linear);
}

ForecastModel build_mlp(int n_variates, int lookback, int horizon, int hidden, bool revin,
                        std::uint64_t seed) {
    if (hidden < 1) throw ShapeMismatch("mlp hidden width");
    nn::ParamStore store;
    std::mt19937_64 rng(seed);
    const int dims[4] = {lookback, hidden, hidden, horizon};
    const char* names[3] = {"input", "hidden", "output"};
    nn::Wiring wiring{lookback, {}};
    for (int l = 0; l < 3; ++l) {
        nn::ParamTensor w(std::string(names[l]) + ".weight", nn::ParamShape::linear(dims[l], dims[l + 1]), 0);
        nn::init_default(w, rng);
        const int wi = store.add(std::move(w));
        const int bi = store.add(nn::ParamTensor(std::string(names[l]) + ".bias", nn::ParamShape::bias(dims[l + 1]), 0));
        wiring.ops.emplace_back(nn::LinearOp{wi});
        wiring.ops.emplace_back(nn::BiasOp{bi});
        if (l < 2) wiring.ops.emplace_back(nn::GeluOp{});
    }
    assign_layer_types(store);
    return ForecastModel(nn::Network(std::move(store), std::move(wiring)),
                         {n_variates, lookback, horizon}, revin, ModelKind::Mlp, hidden);
}

Matrix stack_rows(std::span<const Matrix> items) {
    if (items.empty()) return {};
    Eigen::Index rows = 0;
    for (const auto& m : items) {
        if (m.cols() != items.front().cols()) throw ShapeMismatch("stacked batch");
        rows += m.rows();
    }
    Matrix out(rows, items.front().cols());
    Eigen::Index at = 0;
    for (const auto& m : items) {
        out.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    return out;
}

BatchForward forward_batch(const ForecastModel& model, std::span<const Matrix> xs,
                           const nn::Modulation* modulation) {
    const auto& d = model.dims();
    for (const auto& x : xs)
        if (x.rows() != d.n_variates || x.cols() != d.lookback) throw ShapeMismatch("forecast input");
    BatchForward out;
    out.batch = xs.size();
    Matrix stacked = stack_rows(xs);
    if (model.revin()) {
        auto [normed, state] = nn::revin_normalize(stacked);
        out.cache = nn::forward(model.network(), normed, modulation);
        out.output = nn::revin_denormalize(out.cache.output, state);
        out.revin = std::move(state);
    } else {
        out.cache = nn::forward(model.network(), stacked, modulation);
        out.output = out.cache.output;
    }
    return out;
}

void backward_batch(ForecastModel& model, const BatchForward& fwd, const Matrix& d_output,
                    nn::Modulation* dmod) {
    if (fwd.revin) {
        (void)nn::backward(model.network(), fwd.cache, nn::revin_denormalize_grad(d_output, *fwd.revin), dmod);
    } else {
        (void)nn::backward(model.network(), fwd.cache, d_output, dmod);
    }
}

ParamSnapshot clone_params(const ForecastModel& model) { return model.params(); }

void restore_params(ForecastModel& model, const ParamSnapshot& snapshot) {
    nn::restore_values(model.params(), snapshot);
}

std::string encode_wiring(const nn::Wiring& wiring) {
    std::string out = "in:" + str(wiring.input_dim);
    for (const auto& op : wiring.ops) {
        out += ',';
        if (const auto* l = std::get_if<nn::LinearOp>(&op)) out += "linear:" + str(l->param);
        else if (const auto* b = std::get_if<nn::BiasOp>(&op)) out += "bias:" + str(b->param);
        else if (const auto* c = std::get_if<nn::Conv1dOp>(&op)) out += "conv:" + str(c->param) + ":" + str(c->length);
        else out += "gelu";
    }
    return out;
}

nn::Wiring decode_wiring(const std::string& text) {
    nn::Wiring w;
    const auto items = split(text, ',');
    if (items.empty()) throw WiringMismatch("empty wiring");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto parts = split(items[i], ':');
        if (parts.empty()) throw WiringMismatch("empty wiring op");
        if (i == 0) {
            if (parts.size() != 2 || parts[0] != "in") throw WiringMismatch("wiring must start with in:<dim>");
            w.input_dim = to_int(parts[1], "input dim");
        } else if (parts[0] == "linear" && parts.size() == 2) {
            w.ops.emplace_back(nn::LinearOp{to_int(parts[1], "linear")});
        } else if (parts[0] == "bias" && parts.size() == 2) {
            w.ops.emplace_back(nn::BiasOp{to_int(parts[1], "bias")});
        } else if (parts[0] == "conv" && parts.size() == 3) {
            w.ops.emplace_back(nn::Conv1dOp{to_int(parts[1], "conv"), to_int(parts[2], "conv length")});
        } else if (parts[0] == "gelu" && parts.size() == 1) {
            w.ops.emplace_back(nn::GeluOp{});
        } else {
            throw WiringMismatch("unknown wiring op '" + items[i] + "'");
        }
    }
    return w;
}

nn::CheckpointSection to_checkpoint(const ForecastModel& model) {
    nn::CheckpointSection s;
    s.tag = "model";
    s.meta = {{"kind", to_string(model.kind())},
              {"n_variates", str(model.dims().n_variates)},
              {"lookback", str(model.dims().lookback)},
              {"horizon", str(model.dims().horizon)},
              {"hidden", str(model.hidden())},
              {"revin", model.revin() ? "1" : "0"},
              {"wiring", encode_wiring(model.network().wiring())}};
    s.params = model.params();
    return s;
}

ForecastModel from_checkpoint(const nn::CheckpointSection& section) {
    const auto need = [&](const std::string& key) -> const std::string& {
        const auto* v = section.find_meta(key);
        if (v == nullptr) throw WiringMismatch("model checkpoint lacks '" + key + "'");
        return *v;
    };
    const std::string& kind = need("kind");
    const ModelKind mk = kind == "linear" ? ModelKind::Linear : kind == "mlp" ? ModelKind::Mlp : ModelKind::Custom;
    ModelDims dims{to_int(need("n_variates"), "n_variates"), to_int(need("lookback"), "lookback"),
                   to_int(need("horizon"), "horizon")};
    nn::Network net(section.params, decode_wiring(need("wiring")));
    return ForecastModel(std::move(net), dims, need("revin") == "1", mk, to_int(need("hidden"), "hidden"));
}

}  // namespace driftcast::models
