#include "driftcast/adapter.hpp"

#include "driftcast/errors.hpp"
#include "driftcast/nn/loss.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>

namespace driftcast::adapt {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int meta_int(const nn::CheckpointSection& s, const std::string& key) {
    const auto* v = s.find_meta(key);
    if (v == nullptr) throw WiringMismatch("checkpoint section " + s.tag + " lacks '" + key + "'");
    return std::stoi(*v);
}

const std::string& meta_str(const nn::CheckpointSection& s, const std::string& key) {
    const auto* v = s.find_meta(key);
    if (v == nullptr) throw WiringMismatch("checkpoint section " + s.tag + " lacks '" + key + "'");
    return *v;
}

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

const char* to_string(Aggregation mode) noexcept {
    switch (mode) {
        case Aggregation::Average: return "average";
        case Aggregation::Linear: return "linear";
        case Aggregation::Weighted: return "weighted";
    }
    return "?";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "average") return Aggregation::Average;
    if (s == "linear") return Aggregation::Linear;
    if (s == "weighted") return Aggregation::Weighted;
    throw DimMismatch("unknown aggregation '" + s + "'");
}

ConceptVector aggregate_concepts(const Matrix& features, Aggregation mode, const Matrix& weights) {
    const auto n = features.rows();
    const auto dc = features.cols();
    switch (mode) {
        case Aggregation::Average:
            return {features.colwise().mean().transpose()};
        case Aggregation::Weighted: {
            if (weights.size() != n) throw ModeDimMismatch(static_cast<std::size_t>(weights.size()), static_cast<std::size_t>(n));
            const Eigen::Map<const RowVector> w(weights.data(), n);
            return {(w * features).transpose()};
        }
        case Aggregation::Linear: {
            if (weights.rows() != n * dc) {
                throw ModeDimMismatch(static_cast<std::size_t>(dc == 0 ? 0 : weights.rows() / dc),
                                      static_cast<std::size_t>(n));
            }
            const Eigen::Map<const RowVector> concat(features.data(), n * dc);
            return {(concat * weights).transpose()};
        }
    }
    return {};
}

// ---- ConceptEncoder ---------------------------------------------------------

ConceptEncoder::ConceptEncoder(int input_len, int concept_dim, Aggregation mode, int n_variates,
                               std::uint64_t seed)
    : input_len_(input_len), concept_dim_(concept_dim), mode_(mode), n_variates_(n_variates) {
    if (input_len < 1 || concept_dim < 1 || n_variates < 1) throw ShapeMismatch("concept encoder");
    std::mt19937_64 rng(seed);
    nn::ParamStore store;
    nn::ParamTensor w1("fc1.weight", nn::ParamShape::linear(input_len, concept_dim), 0);
    nn::init_default(w1, rng);
    nn::ParamTensor w2("fc2.weight", nn::ParamShape::linear(concept_dim, concept_dim), 0);
    nn::init_default(w2, rng);
    const int i1 = store.add(std::move(w1));
    const int b1 = store.add(nn::ParamTensor("fc1.bias", nn::ParamShape::bias(concept_dim), 0));
    const int i2 = store.add(std::move(w2));
    const int b2 = store.add(nn::ParamTensor("fc2.bias", nn::ParamShape::bias(concept_dim), 0));
    if (mode == Aggregation::Linear) {
        nn::ParamTensor agg("agg.weight", nn::ParamShape::linear(n_variates * concept_dim, concept_dim), 0);
        auto m = agg.matrix();
        for (int v = 0; v < n_variates; ++v)
            m.middleRows(static_cast<Eigen::Index>(v) * concept_dim, concept_dim) =
                Matrix::Identity(concept_dim, concept_dim) / n_variates;
        agg_param_ = store.add(std::move(agg));
    } else if (mode == Aggregation::Weighted) {
        nn::ParamTensor agg("agg.weight", nn::ParamShape::bias(n_variates), 0);
        agg.values.setConstant(1.0 / n_variates);
        agg_param_ = store.add(std::move(agg));
    }
    nn::Wiring wiring{input_len, {nn::LinearOp{i1}, nn::BiasOp{b1}, nn::GeluOp{}, nn::LinearOp{i2}, nn::BiasOp{b2}}};
    mlp_ = nn::Network(std::move(store), std::move(wiring));
}

Matrix ConceptEncoder::aggregation_weights() const {
    if (agg_param_ < 0) return {};
    const auto& t = mlp_.params()[static_cast<std::size_t>(agg_param_)];
    if (mode_ == Aggregation::Weighted) return t.values.transpose();
    return t.matrix();
}

ConceptEncoder::Batch ConceptEncoder::forward(const Matrix& rows, std::size_t batch) const {
    if (rows.cols() != input_len_)
        throw ArityMismatch(static_cast<std::size_t>(input_len_), static_cast<std::size_t>(rows.cols()));
    if (batch == 0 || rows.rows() % static_cast<Eigen::Index>(batch) != 0)
        throw BatchArityMismatch(batch, static_cast<std::size_t>(rows.rows()));
    const auto n = rows.rows() / static_cast<Eigen::Index>(batch);
    if (mode_ != Aggregation::Average && n != n_variates_)
        throw ModeDimMismatch(static_cast<std::size_t>(n_variates_), static_cast<std::size_t>(n));

    Batch out;
    out.batch = batch;
    out.mlp = nn::forward(mlp_, rows);
    out.concepts.resize(static_cast<Eigen::Index>(batch), concept_dim_);
    const Matrix weights = aggregation_weights();
    for (std::size_t j = 0; j < batch; ++j) {
        const Matrix f = out.mlp.output.middleRows(static_cast<Eigen::Index>(j) * n, n);
        out.concepts.row(static_cast<Eigen::Index>(j)) = aggregate_concepts(f, mode_, weights).values.transpose();
    }
    return out;
}

void ConceptEncoder::backward(const Batch& fwd, const Matrix& d_concepts) {
    const auto& features = fwd.mlp.output;
    const auto b = static_cast<Eigen::Index>(fwd.batch);
    const auto n = features.rows() / b;
    const auto dc = concept_dim_;
    Matrix d_features(features.rows(), features.cols());
    switch (mode_) {
        case Aggregation::Average:
            for (Eigen::Index j = 0; j < b; ++j)
                d_features.middleRows(j * n, n).rowwise() = d_concepts.row(j) / static_cast<double>(n);
            break;
        case Aggregation::Weighted: {
            const auto& w = mlp_.params()[static_cast<std::size_t>(agg_param_)].values;
            Vector& dw = mlp_.params().grad(static_cast<std::size_t>(agg_param_));
            for (Eigen::Index j = 0; j < b; ++j)
                for (Eigen::Index v = 0; v < n; ++v) {
                    d_features.row(j * n + v) = w(v) * d_concepts.row(j);
                    dw(v) += features.row(j * n + v).dot(d_concepts.row(j));
                }
            break;
        }
        case Aggregation::Linear: {
            const auto& t = mlp_.params()[static_cast<std::size_t>(agg_param_)];
            const auto w = t.matrix();
            Eigen::Map<Matrix> dw(mlp_.params().grad(static_cast<std::size_t>(agg_param_)).data(), n * dc, dc);
            for (Eigen::Index j = 0; j < b; ++j) {
                const Matrix block = features.middleRows(j * n, n);
                const Eigen::Map<const RowVector> concat(block.data(), n * dc);
                dw.noalias() += concat.transpose() * d_concepts.row(j);
                const RowVector dconcat = d_concepts.row(j) * w.transpose();
                d_features.middleRows(j * n, n) = Eigen::Map<const Matrix>(dconcat.data(), n, dc);
            }
            break;
        }
    }
    (void)nn::backward(mlp_, fwd.mlp, d_features);
}

ConceptVector ConceptEncoder::encode(const Matrix& rows) const {
    return {forward(rows, 1).concepts.row(0).transpose()};
}

nn::CheckpointSection ConceptEncoder::to_checkpoint(const std::string& tag) const {
    nn::CheckpointSection s;
    s.tag = tag;
    s.meta = {{"input_len", std::to_string(input_len_)},
              {"concept_dim", std::to_string(concept_dim_)},
              {"aggregation", to_string(mode_)},
              {"n_variates", std::to_string(n_variates_)}};
    s.params = mlp_.params();
    return s;
}

ConceptEncoder ConceptEncoder::from_checkpoint(const nn::CheckpointSection& section) {
    ConceptEncoder enc(meta_int(section, "input_len"), meta_int(section, "concept_dim"),
                       aggregation_from_string(meta_str(section, "aggregation")),
                       meta_int(section, "n_variates"), 0);
    nn::restore_values(enc.mlp_.params(), section.params);
    return enc;
}

ConceptVector encode_train_concept(const ConceptEncoder& enc, std::span<const data::WindowSample> samples) {
    if (samples.empty()) throw BatchArityMismatch(0, 0);
    for (const auto& s : samples)
        if (s.x.cols() + s.y.cols() != enc.input_len())
            throw ArityMismatch(static_cast<std::size_t>(enc.input_len()),
                                static_cast<std::size_t>(s.x.cols() + s.y.cols()));
    const auto fwd = enc.forward(stack_xy(samples), samples.size());
    return {fwd.concepts.colwise().mean().transpose()};
}

ConceptVector encode_test_concept(const ConceptEncoder& enc, const Matrix& x) { return enc.encode(x); }

DriftVector estimate_drift(const ConceptVector& c_to, const ConceptVector& c_from) {
    if (c_to.values.size() != c_from.values.size())
        throw DimMismatch("concept vectors of length " + std::to_string(c_to.values.size()) + " and " +
                          std::to_string(c_from.values.size()));
    return {c_to.values - c_from.values};
}

// ---- coefficients -------------------------------------------------------------

AdaptationCoefficients AdaptationCoefficients::identity(const models::ForecastModel& model) {
    AdaptationCoefficients out;
    for (const auto& t : model.params().tensors()) {
        LayerCoefficients lc;
        if (t.shape.kind != nn::ParamKind::Bias) lc.alpha = Vector::Ones(t.shape.d_in);
        lc.beta = Vector::Ones(t.shape.d_out);
        out.layers.push_back(std::move(lc));
    }
    return out;
}

CoeffGenerator::CoeffGenerator(const models::LayerTypeRegistry& registry, int concept_dim, int rank,
                               bool shared, std::uint64_t seed)
    : concept_dim_(concept_dim), rank_(rank), shared_(shared) {
    if (concept_dim < 1) throw ShapeMismatch("generator concept_dim");
    if (rank < 1) throw ShapeMismatch("generator rank must be positive");
    std::mt19937_64 rng(seed);
    const auto make_w1 = [&](const std::string& name) {
        nn::ParamTensor w("gen." + name + ".w1", nn::ParamShape::linear(concept_dim, rank), 0);
        nn::init_default(w, rng);
        return store_.add(std::move(w));
    };
    const auto make_w2 = [&](const std::string& name, int width) {
        return store_.add(nn::ParamTensor("gen." + name + ".w2", nn::ParamShape::linear(rank, width), 0));
    };

    std::vector<int> type_w1(registry.n_types(), -1);
    std::vector<int> type_w2(registry.n_types(), -1);
    if (shared) {
        for (const auto& e : registry.entries()) {
            const int din = e.shape.kind == nn::ParamKind::Bias ? 0 : e.shape.d_in;
            const std::string name = "type" + std::to_string(e.id);
            type_w1[static_cast<std::size_t>(e.id)] = make_w1(name);
            type_w2[static_cast<std::size_t>(e.id)] = make_w2(name, din + e.shape.d_out);
        }
    }
    for (std::size_t l = 0; l < registry.n_layers(); ++l) {
        const auto& e = registry.entry(registry.type_of(static_cast<int>(l)));
        Layer layer;
        layer.d_in = e.shape.kind == nn::ParamKind::Bias ? 0 : e.shape.d_in;
        layer.d_out = e.shape.d_out;
        const std::string name = "layer" + std::to_string(l);
        if (shared) {
            layer.w1 = type_w1[static_cast<std::size_t>(e.id)];
            layer.w2 = type_w2[static_cast<std::size_t>(e.id)];
        } else {
            layer.w1 = make_w1(name);
            layer.w2 = make_w2(name, layer.d_in + layer.d_out);
        }
        layer.b = store_.add(nn::ParamTensor("gen." + name + ".b", nn::ParamShape::bias(rank), 0));
        layers_.push_back(layer);
    }
}

void CoeffGenerator::check_registry(const models::LayerTypeRegistry& registry) const {
    if (registry.n_layers() != layers_.size())
        throw RegistryMismatch("generator has " + std::to_string(layers_.size()) + " layers, registry " +
                               std::to_string(registry.n_layers()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& s = registry.entry(registry.type_of(static_cast<int>(l))).shape;
        const int din = s.kind == nn::ParamKind::Bias ? 0 : s.d_in;
        if (din != layers_[l].d_in || s.d_out != layers_[l].d_out)
            throw RegistryMismatch("layer " + std::to_string(l) + " dims differ");
    }
}

CoeffGenerator::Batch CoeffGenerator::forward(const Matrix& inputs) const {
    if (inputs.cols() != concept_dim_) throw DimMismatch("generator input width");
    Batch out;
    out.input = inputs;
    out.hidden.reserve(layers_.size());
    out.coeffs.reserve(layers_.size());
    for (const auto& layer : layers_) {
        const auto& w1 = store_[static_cast<std::size_t>(layer.w1)];
        const auto& w2 = store_[static_cast<std::size_t>(layer.w2)];
        const auto& b = store_[static_cast<std::size_t>(layer.b)];
        Matrix z = inputs * w1.matrix();
        z.rowwise() += b.values.transpose();
        Matrix s = z.unaryExpr([](double v) { return sigmoid(v); });
        Matrix c = s * w2.matrix();
        c.array() += 1.0;
        out.hidden.push_back(std::move(s));
        out.coeffs.push_back(std::move(c));
    }
    return out;
}

Matrix CoeffGenerator::backward(const Batch& fwd, const std::vector<Matrix>& d_coeffs) {
    if (d_coeffs.size() != layers_.size()) throw DimMismatch("coefficient gradients per layer");
    Matrix d_in = Matrix::Zero(fwd.input.rows(), fwd.input.cols());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const auto w1i = static_cast<std::size_t>(layer.w1);
        const auto w2i = static_cast<std::size_t>(layer.w2);
        const auto bi = static_cast<std::size_t>(layer.b);
        const Matrix& s = fwd.hidden[l];
        const Matrix& dc = d_coeffs[l];
        Eigen::Map<Matrix> dw2(store_.grad(w2i).data(), rank_, layer.d_in + layer.d_out);
        dw2.noalias() += s.transpose() * dc;
        const Matrix ds = dc * store_[w2i].matrix().transpose();
        const Matrix dz = ds.array() * s.array() * (1.0 - s.array());
        Eigen::Map<Matrix> dw1(store_.grad(w1i).data(), concept_dim_, rank_);
        dw1.noalias() += fwd.input.transpose() * dz;
        store_.grad(bi) += dz.colwise().sum().transpose();
        d_in.noalias() += dz * store_[w1i].matrix().transpose();
    }
    return d_in;
}

nn::CheckpointSection CoeffGenerator::to_checkpoint(const std::string& tag) const {
    nn::CheckpointSection s;
    s.tag = tag;
    s.meta = {{"concept_dim", std::to_string(concept_dim_)},
              {"rank", std::to_string(rank_)},
              {"shared", shared_ ? "1" : "0"}};
    s.params = store_;
    return s;
}

CoeffGenerator CoeffGenerator::from_checkpoint(const nn::CheckpointSection& section,
                                               const models::LayerTypeRegistry& registry) {
    CoeffGenerator gen(registry, meta_int(section, "concept_dim"), meta_int(section, "rank"),
                       meta_str(section, "shared") == "1", 0);
    nn::restore_values(gen.store_, section.params);
    return gen;
}

AdaptationCoefficients generate_coefficients(const CoeffGenerator& gen, const DriftVector& drift,
                                             const models::LayerTypeRegistry& registry) {
    if (drift.values.size() != gen.concept_dim()) throw DimMismatch("drift length vs generator concept_dim");
    gen.check_registry(registry);
    const auto fwd = gen.forward(drift.values.transpose());
    AdaptationCoefficients out;
    out.layers.reserve(gen.layers_.size());
    for (std::size_t l = 0; l < gen.layers_.size(); ++l) {
        const auto& layer = gen.layers_[l];
        const RowVector row = fwd.coeffs[l].row(0);
        LayerCoefficients lc;
        if (layer.d_in > 0) lc.alpha = row.head(layer.d_in).transpose();
        lc.beta = row.tail(layer.d_out).transpose();
        out.layers.push_back(std::move(lc));
    }
    return out;
}

nn::ParamTensor materialize_adapted(const nn::ParamTensor& theta, const Vector& alpha, const Vector& beta) {
    const auto& s = theta.shape;
    if (beta.size() != s.d_out) throw DimMismatch("beta length for " + theta.name);
    nn::ParamTensor out = theta;
    out.grad.setZero();
    if (s.kind == nn::ParamKind::Bias) {
        out.values = theta.values.cwiseProduct(beta);
        return out;
    }
    if (alpha.size() != s.d_in) throw DimMismatch("alpha length for " + theta.name);
    const Matrix scale = alpha * beta.transpose();
    for (int k = 0; k < s.d_k; ++k) out.matrix(k) = theta.matrix(k).cwiseProduct(scale);
    return out;
}

namespace {

nn::Modulation modulation_from_rows(const models::ForecastModel& model, std::size_t batch,
                                    const std::function<RowVector(std::size_t layer, std::size_t item, bool alpha)>& row) {
    const int n = model.dims().n_variates;
    const auto& params = model.params();
    nn::Modulation mod(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& s = params[i].shape;
        auto& m = mod[i];
        m.active = true;
        m.beta.resize(static_cast<Eigen::Index>(batch) * n, s.d_out);
        if (s.kind != nn::ParamKind::Bias) m.alpha.resize(static_cast<Eigen::Index>(batch) * n, s.d_in);
        for (std::size_t j = 0; j < batch; ++j) {
            const auto at = static_cast<Eigen::Index>(j) * n;
            m.beta.middleRows(at, n).rowwise() = row(i, j, false);
            if (s.kind != nn::ParamKind::Bias) m.alpha.middleRows(at, n).rowwise() = row(i, j, true);
        }
    }
    return mod;
}

}  // namespace

nn::Modulation build_modulation(const models::ForecastModel& model, std::span<const AdaptationCoefficients> coeffs) {
    const auto& params = model.params();
    for (const auto& c : coeffs) {
        if (c.layers.size() != params.size()) throw RegistryMismatch("coefficient set does not cover every layer");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& s = params[i].shape;
            if (c.layers[i].beta.size() != s.d_out ||
                (s.kind != nn::ParamKind::Bias && c.layers[i].alpha.size() != s.d_in))
                throw DimMismatch("coefficients for " + params[i].name);
        }
    }
    return modulation_from_rows(model, coeffs.size(), [&](std::size_t l, std::size_t j, bool alpha) -> RowVector {
        return alpha ? coeffs[j].layers[l].alpha.transpose() : coeffs[j].layers[l].beta.transpose();
    });
}

nn::Modulation build_modulation(const models::ForecastModel& model, const CoeffGenerator::Batch& gen) {
    const auto& params = model.params();
    if (gen.coeffs.size() != params.size()) throw RegistryMismatch("generator does not cover every layer");
    return modulation_from_rows(model, static_cast<std::size_t>(gen.input.rows()),
                                [&](std::size_t l, std::size_t j, bool alpha) -> RowVector {
                                    const auto& s = params[l].shape;
                                    const auto r = static_cast<Eigen::Index>(j);
                                    if (alpha) return gen.coeffs[l].row(r).head(s.d_in);
                                    return gen.coeffs[l].row(r).tail(s.d_out);
                                });
}

std::vector<Matrix> adapted_forward(const models::ForecastModel& model, std::span<const AdaptationCoefficients> coeffs,
                                    std::span<const Matrix> xs) {
    if (coeffs.size() != xs.size()) throw BatchArityMismatch(coeffs.size(), xs.size());
    const auto mod = build_modulation(model, coeffs);
    const auto fwd = models::forward_batch(model, xs, &mod);
    std::vector<Matrix> out;
    out.reserve(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) out.push_back(fwd.item(j, model.dims().n_variates));
    return out;
}

std::int64_t adapter_param_count(const CoeffGenerator& gen, const models::LayerTypeRegistry& registry) {
    std::int64_t n = 0;
    const auto r = static_cast<std::int64_t>(gen.rank());
    const auto dc = static_cast<std::int64_t>(gen.concept_dim());
    const auto width = [](const nn::ParamShape& s) {
        return static_cast<std::int64_t>(s.kind == nn::ParamKind::Bias ? 0 : s.d_in) + s.d_out;
    };
    if (gen.shared()) {
        for (const auto& e : registry.entries()) n += r * dc + r * width(e.shape);
    } else {
        for (std::size_t l = 0; l < registry.n_layers(); ++l)
            n += r * dc + r * width(registry.entry(registry.type_of(static_cast<int>(l))).shape);
    }
    n += r * static_cast<std::int64_t>(registry.n_layers());
    return n;
}

std::int64_t naive_dense_param_count(const models::LayerTypeRegistry& registry, int concept_dim) {
    std::int64_t n = 0;
    for (std::size_t l = 0; l < registry.n_layers(); ++l)
        n += static_cast<std::int64_t>(concept_dim) * registry.entry(registry.type_of(static_cast<int>(l))).shape.size();
    return n;
}

// ---- DriftAdapter ---------------------------------------------------------------

DriftAdapter::DriftAdapter(const models::ForecastModel& model, AdapterConfig config, std::uint64_t seed)
    : config_(config),
      train_enc_(model.dims().lookback + model.dims().horizon, config.concept_dim, config.aggregation,
                 model.dims().n_variates, mix_seed(seed, 1)),
      test_enc_(model.dims().lookback, config.concept_dim, config.aggregation, model.dims().n_variates,
                mix_seed(seed, 2)),
      gen_(model.registry(), config.concept_dim, config.rank, config.shared_generator, mix_seed(seed, 3)) {}

DriftAdapter::DriftAdapter(AdapterConfig config, ConceptEncoder train_encoder, ConceptEncoder test_encoder,
                           CoeffGenerator generator)
    : config_(config), train_enc_(std::move(train_encoder)), test_enc_(std::move(test_encoder)),
      gen_(std::move(generator)) {}

std::vector<nn::ParamStore*> DriftAdapter::trainable_stores() {
    std::vector<nn::ParamStore*> out;
    const bool uses_e = config_.input == GeneratorInput::Drift &&
                        config_.train_concept == TrainConceptSource::TrainEncoderXY;
    if (uses_e) out.push_back(&train_enc_.params());
    out.push_back(&test_enc_.params());
    out.push_back(&gen_.params());
    return out;
}

std::uint64_t DriftAdapter::checksum() const noexcept {
    std::uint64_t h = train_enc_.params().checksum();
    h = h * 1099511628211ULL ^ test_enc_.params().checksum();
    h = h * 1099511628211ULL ^ gen_.params().checksum();
    return h;
}

std::int64_t DriftAdapter::encoder_param_count() const noexcept {
    return train_enc_.params().parameter_count() + test_enc_.params().parameter_count();
}

ConceptVector DriftAdapter::train_concept(const data::WindowSample& sample) const {
    if (config_.train_concept == TrainConceptSource::TestEncoderLookback) return test_enc_.encode(sample.x);
    const data::WindowSample one[1] = {sample};
    return encode_train_concept(train_enc_, one);
}

ConceptVector DriftAdapter::test_concept(const Matrix& x) const { return test_enc_.encode(x); }

Vector DriftAdapter::generator_input(const ConceptVector& c_train, const ConceptVector& c_test) const {
    if (config_.input == GeneratorInput::TestConcept) return c_test.values;
    return estimate_drift(c_test, c_train).values;
}

AdaptationCoefficients DriftAdapter::coefficients(const Vector& generator_input,
                                                  const models::LayerTypeRegistry& registry) const {
    return generate_coefficients(gen_, DriftVector{generator_input}, registry);
}

nn::Checkpoint DriftAdapter::to_checkpoint() const {
    nn::Checkpoint ckpt;
    nn::CheckpointSection cfg;
    cfg.tag = "adapter.config";
    cfg.meta = {{"concept_dim", std::to_string(config_.concept_dim)},
                {"rank", std::to_string(config_.rank)},
                {"aggregation", to_string(config_.aggregation)},
                {"shared_generator", config_.shared_generator ? "1" : "0"},
                {"input", config_.input == GeneratorInput::Drift ? "drift" : "test_concept"},
                {"train_concept", config_.train_concept == TrainConceptSource::TrainEncoderXY ? "e_xy" : "e_prime_x"},
                {"prev_batch", config_.prev_batch == TrainConceptSource::TrainEncoderXY ? "e_xy" : "e_prime_x"}};
    ckpt.sections.push_back(std::move(cfg));
    ckpt.sections.push_back(train_enc_.to_checkpoint("adapter.E"));
    ckpt.sections.push_back(test_enc_.to_checkpoint("adapter.E_prime"));
    ckpt.sections.push_back(gen_.to_checkpoint("adapter.generator"));
    return ckpt;
}

DriftAdapter DriftAdapter::from_checkpoint(const nn::Checkpoint& ckpt, const models::LayerTypeRegistry& registry) {
    const auto* cfg = ckpt.find("adapter.config");
    const auto* e = ckpt.find("adapter.E");
    const auto* ep = ckpt.find("adapter.E_prime");
    const auto* g = ckpt.find("adapter.generator");
    if (cfg == nullptr || e == nullptr || ep == nullptr || g == nullptr)
        throw WiringMismatch("checkpoint lacks adapter sections");
    AdapterConfig c;
    c.concept_dim = meta_int(*cfg, "concept_dim");
    c.rank = meta_int(*cfg, "rank");
    c.aggregation = aggregation_from_string(meta_str(*cfg, "aggregation"));
    c.shared_generator = meta_str(*cfg, "shared_generator") == "1";
    c.input = meta_str(*cfg, "input") == "drift" ? GeneratorInput::Drift : GeneratorInput::TestConcept;
    c.train_concept = meta_str(*cfg, "train_concept") == "e_xy" ? TrainConceptSource::TrainEncoderXY
                                                                 : TrainConceptSource::TestEncoderLookback;
    c.prev_batch = meta_str(*cfg, "prev_batch") == "e_xy" ? TrainConceptSource::TrainEncoderXY
                                                           : TrainConceptSource::TestEncoderLookback;
    return DriftAdapter(c, ConceptEncoder::from_checkpoint(*e), ConceptEncoder::from_checkpoint(*ep),
                        CoeffGenerator::from_checkpoint(*g, registry));
}

// ---- joint training pass ---------------------------------------------------------

Matrix stack_xy(std::span<const data::WindowSample> samples) {
    if (samples.empty()) return {};
    const auto n = samples.front().x.rows();
    const auto l = samples.front().x.cols();
    const auto h = samples.front().y.cols();
    Matrix out(static_cast<Eigen::Index>(samples.size()) * n, l + h);
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const auto& s = samples[j];
        if (s.x.rows() != n || s.y.rows() != n || s.x.cols() != l || s.y.cols() != h)
            throw ShapeMismatch("sample batch");
        out.block(static_cast<Eigen::Index>(j) * n, 0, n, l) = s.x;
        out.block(static_cast<Eigen::Index>(j) * n, l, n, h) = s.y;
    }
    return out;
}

Matrix stack_x(std::span<const data::WindowSample> samples) {
    std::vector<Matrix> xs;
    xs.reserve(samples.size());
    for (const auto& s : samples) xs.push_back(s.x);
    return models::stack_rows(xs);
}

namespace {

double joint_pass(models::ForecastModel& model, DriftAdapter& adapter, std::span<const data::WindowSample> previous,
                  std::span<const data::WindowSample> current, bool with_grads) {
    if (current.empty()) throw BatchArityMismatch(0, 0);
    const auto& cfg = adapter.config();
    const auto b = static_cast<Eigen::Index>(current.size());
    const int n = model.dims().n_variates;

    const Matrix x_cur = stack_x(current);
    const auto test_fwd = adapter.test_encoder().forward(x_cur, current.size());

    const bool use_prev = cfg.input == GeneratorInput::Drift && !previous.empty();
    const bool prev_uses_e = cfg.train_concept == TrainConceptSource::TrainEncoderXY &&
                             cfg.prev_batch == TrainConceptSource::TrainEncoderXY;
    std::optional<ConceptEncoder::Batch> prev_fwd;
    Matrix gen_in;
    if (cfg.input == GeneratorInput::TestConcept) {
        gen_in = test_fwd.concepts;
    } else if (!use_prev) {
        gen_in = Matrix::Zero(b, cfg.concept_dim);
    } else {
        if (prev_uses_e)
            prev_fwd = adapter.train_encoder().forward(stack_xy(previous), previous.size());
        else
            prev_fwd = adapter.test_encoder().forward(stack_x(previous), previous.size());
        const RowVector c_prev = prev_fwd->concepts.colwise().mean();
        gen_in = test_fwd.concepts.rowwise() - c_prev;
    }

    const auto gen_fwd = adapter.generator().forward(gen_in);
    const auto mod = build_modulation(model, gen_fwd);
    std::vector<Matrix> xs;
    xs.reserve(current.size());
    for (const auto& s : current) xs.push_back(s.x);
    const auto fwd = models::forward_batch(model, xs, &mod);

    double loss = 0.0;
    Matrix d_out(fwd.output.rows(), fwd.output.cols());
    for (Eigen::Index j = 0; j < b; ++j) {
        const Matrix yhat = fwd.output.middleRows(j * n, n);
        const auto& y = current[static_cast<std::size_t>(j)].y;
        loss += nn::mse(yhat, y);
        d_out.middleRows(j * n, n) = nn::mse_grad(yhat, y) / static_cast<double>(b);
    }
    loss /= static_cast<double>(b);
    if (!with_grads) return loss;

    nn::Modulation dmod;
    models::backward_batch(model, fwd, d_out, &dmod);

    const auto& params = model.params();
    std::vector<Matrix> d_coeffs(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& s = params[i].shape;
        const int din = s.kind == nn::ParamKind::Bias ? 0 : s.d_in;
        Matrix& dc = d_coeffs[i];
        dc.resize(b, din + s.d_out);
        for (Eigen::Index j = 0; j < b; ++j) {
            if (din > 0) dc.row(j).head(din) = dmod[i].alpha.middleRows(j * n, n).colwise().sum();
            dc.row(j).tail(s.d_out) = dmod[i].beta.middleRows(j * n, n).colwise().sum();
        }
    }
    const Matrix d_in = adapter.generator().backward(gen_fwd, d_coeffs);

    if (cfg.input == GeneratorInput::TestConcept) {
        adapter.test_encoder().backward(test_fwd, d_in);
    } else if (use_prev) {
        adapter.test_encoder().backward(test_fwd, d_in);
        const RowVector d_prev_mean = -d_in.colwise().sum();
        Matrix d_prev(static_cast<Eigen::Index>(previous.size()), cfg.concept_dim);
        d_prev.rowwise() = d_prev_mean / static_cast<double>(previous.size());
        if (prev_uses_e)
            adapter.train_encoder().backward(*prev_fwd, d_prev);
        else
            adapter.test_encoder().backward(*prev_fwd, d_prev);
    }
    return loss;
}

}  // namespace

double joint_loss_and_grad(models::ForecastModel& model, DriftAdapter& adapter,
                           std::span<const data::WindowSample> previous,
                           std::span<const data::WindowSample> current) {
    return joint_pass(model, adapter, previous, current, true);
}

double joint_loss(const models::ForecastModel& model, const DriftAdapter& adapter,
                  std::span<const data::WindowSample> previous, std::span<const data::WindowSample> current) {
    // The gradient-free pass never mutates either argument.
    return joint_pass(const_cast<models::ForecastModel&>(model), const_cast<DriftAdapter&>(adapter), previous,
                      current, false);
}

}  // namespace driftcast::adapt
