#pragma once

// Randomized checks used both by the unit tests and by the acceptance runner.
// Each returns the worst error it saw so callers can apply their own bound.

#include "driftcast/adapter.hpp"
#include "driftcast/forecasters.hpp"
#include "driftcast/nn/loss.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace checks {

using driftcast::Matrix;
using driftcast::Vector;
namespace adapt = driftcast::adapt;
namespace models = driftcast::models;
namespace nn = driftcast::nn;

/// A random model of one of three families: linear, mlp, conv.
inline models::ForecastModel random_model(std::mt19937_64& rng, int family) {
    std::uniform_int_distribution<int> n(1, 4), l(2, 10), h(1, 5), hid(2, 9);
    const int N = n(rng), L = l(rng), H = h(rng);
    const std::uint64_t seed = rng();
    std::bernoulli_distribution coin(0.5);
    switch (family % 3) {
        case 0: return models::build_linear(N, L, H, coin(rng), seed);
        case 1: return models::build_mlp(N, L, H, hid(rng), coin(rng), seed);
        default: return testutil::build_conv_model(N, L, H, hid(rng) % 4 + 1, hid(rng) % 3 + 1, seed);
    }
}

/// Random coefficients for every parameter of the model (alpha empty for biases).
inline adapt::AdaptationCoefficients random_coefficients(const models::ForecastModel& model, std::mt19937_64& rng) {
    adapt::AdaptationCoefficients c;
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (const auto& t : model.params().tensors()) {
        adapt::LayerCoefficients lc;
        if (t.shape.kind != nn::ParamKind::Bias) {
            lc.alpha.resize(t.shape.d_in);
            for (auto& v : lc.alpha) v = u(rng);
        }
        lc.beta.resize(t.shape.d_out);
        for (auto& v : lc.beta) v = u(rng);
        c.layers.push_back(std::move(lc));
    }
    return c;
}

/// Copy of the model whose parameters are the materialized adapted tensors.
inline models::ForecastModel materialized(const models::ForecastModel& model, const adapt::AdaptationCoefficients& c) {
    models::ForecastModel out = model;
    for (std::size_t i = 0; i < model.params().size(); ++i)
        out.params().mutate(i).values =
            adapt::materialize_adapted(model.params()[i], c.layers[i].alpha, c.layers[i].beta).values;
    return out;
}

/// Elementwise scale that maps theta to its materialized form (d theta_hat / d theta).
inline Vector scale_of(const nn::ParamTensor& t, const adapt::LayerCoefficients& c) {
    nn::ParamTensor ones = t;
    ones.values.setOnes();
    return adapt::materialize_adapted(ones, c.alpha, c.beta).values;
}

struct EquivalenceError {
    double output = 0.0;
    double gradient = 0.0;
};

/// Compares the functional (per-row modulation) path with explicit
/// materialization on one random model and a batch of random coefficients:
/// outputs, and gradients of a random linear functional with respect to the
/// base parameters.
inline EquivalenceError functional_vs_materialized(std::mt19937_64& rng, int family) {
    auto model = random_model(rng, family);
    testutil::randomize(model.params(), rng);
    const auto& d = model.dims();
    std::uniform_int_distribution<int> bsz(1, 4);
    const int B = bsz(rng);
    std::vector<Matrix> xs;
    std::vector<adapt::AdaptationCoefficients> cs;
    std::vector<Matrix> rs;
    for (int b = 0; b < B; ++b) {
        xs.push_back(testutil::random_matrix(rng, d.n_variates, d.lookback));
        cs.push_back(random_coefficients(model, rng));
        rs.push_back(testutil::random_matrix(rng, d.n_variates, d.horizon));
    }

    EquivalenceError err;
    const auto outs = adapt::adapted_forward(model, cs, xs);

    // functional gradient
    auto mod = adapt::build_modulation(model, cs);
    model.params().zero_grad();
    const auto fwd = models::forward_batch(model, xs, &mod);
    models::backward_batch(model, fwd, models::stack_rows(rs));
    std::vector<Vector> g_fun;
    for (const auto& t : model.params().tensors()) g_fun.push_back(t.grad);

    std::vector<Vector> g_mat(model.params().size());
    for (std::size_t i = 0; i < g_mat.size(); ++i) g_mat[i] = Vector::Zero(model.params()[i].values.size());
    for (int b = 0; b < B; ++b) {
        auto m = materialized(model, cs[static_cast<std::size_t>(b)]);
        const Matrix ref = m.forecast(xs[static_cast<std::size_t>(b)]);
        err.output = std::max(err.output, testutil::max_rel_err(outs[static_cast<std::size_t>(b)], ref, 1e-6));
        m.params().zero_grad();
        const Matrix one[1] = {xs[static_cast<std::size_t>(b)]};
        const auto f = models::forward_batch(m, one);
        models::backward_batch(m, f, rs[static_cast<std::size_t>(b)]);
        for (std::size_t i = 0; i < g_mat.size(); ++i)
            g_mat[i] += m.params()[i].grad.cwiseProduct(scale_of(model.params()[i], cs[static_cast<std::size_t>(b)].layers[i]));
    }
    for (std::size_t i = 0; i < g_mat.size(); ++i)
        err.gradient = std::max(err.gradient, testutil::max_rel_err(g_fun[i], g_mat[i], 1e-6));
    return err;
}

/// True when a fresh generator yields all-ones coefficients for a random
/// drift and the adapted forecast is bit-identical to the plain one.
inline bool identity_at_init(std::mt19937_64& rng, int family) {
    auto model = random_model(rng, family);
    testutil::randomize(model.params(), rng);
    std::uniform_int_distribution<int> dc(1, 12), r(1, 6);
    const int d_c = dc(rng);
    adapt::AdapterConfig cfg;
    cfg.concept_dim = d_c;
    cfg.rank = r(rng);
    const adapt::DriftAdapter adapter(model, cfg, rng());
    const adapt::DriftVector delta{testutil::random_vector(rng, d_c, 3.0)};
    const auto coeffs = adapt::generate_coefficients(adapter.generator(), delta, model.registry());
    for (const auto& l : coeffs.layers) {
        if (!(l.alpha.array() == 1.0).all() || !(l.beta.array() == 1.0).all()) return false;
    }
    const Matrix x = testutil::random_matrix(rng, model.dims().n_variates, model.dims().lookback, 2.0);
    const std::uint64_t before = model.params().checksum();
    const adapt::AdaptationCoefficients cs[1] = {coeffs};
    const Matrix xs[1] = {x};
    const auto out = adapt::adapted_forward(model, cs, xs);
    const Matrix plain = model.forecast(x);
    return model.params().checksum() == before && out[0] == plain;
}

/// Worst relative error of the analytic joint gradient (model plus every
/// adapter store) against central differences of the joint loss.
inline double joint_gradient_error(std::mt19937_64& rng, int n_variates, int lookback, int horizon, int d_c, int rank,
                                   adapt::AdapterConfig cfg, bool mlp = true) {
    auto model = mlp ? models::build_mlp(n_variates, lookback, horizon, 5, false, rng())
                     : models::build_linear(n_variates, lookback, horizon, false, rng());
    testutil::randomize(model.params(), rng, 0.4);
    cfg.concept_dim = d_c;
    cfg.rank = rank;
    adapt::DriftAdapter adapter(model, cfg, rng());
    testutil::randomize(adapter.train_encoder().params(), rng, 0.4);
    testutil::randomize(adapter.test_encoder().params(), rng, 0.4);
    testutil::randomize(adapter.generator().params(), rng, 0.4);

    const int T = lookback + horizon + 8;
    const driftcast::data::SeriesFrame frame(testutil::random_matrix(rng, n_variates, T), [&] {
        std::vector<std::string> names;
        for (int i = 0; i < n_variates; ++i) names.push_back("v" + std::to_string(i));
        return names;
    }());
    const auto windows = driftcast::data::make_windows(frame, lookback, horizon, 1, T);
    const std::vector<driftcast::data::WindowSample> prev(windows.begin(), windows.begin() + 3);
    const std::vector<driftcast::data::WindowSample> cur(windows.begin() + 3, windows.begin() + 6);

    std::vector<nn::ParamStore*> stores{&model.params(), &adapter.train_encoder().params(),
                                        &adapter.test_encoder().params(), &adapter.generator().params()};
    for (auto* s : stores) s->zero_grad();
    (void)adapt::joint_loss_and_grad(model, adapter, prev, cur);
    std::vector<std::vector<Vector>> analytic;
    for (auto* s : stores) {
        std::vector<Vector> g;
        for (const auto& t : s->tensors()) g.push_back(t.grad);
        analytic.push_back(std::move(g));
    }
    double worst = 0.0;
    for (std::size_t si = 0; si < stores.size(); ++si)
        for (std::size_t ti = 0; ti < stores[si]->size(); ++ti)
            for (Eigen::Index k = 0; k < (*stores[si])[ti].values.size(); ++k) {
                auto& v = stores[si]->mutate(ti).values(k);
                const double fd = testutil::central_diff(v, [&] { return adapt::joint_loss(model, adapter, prev, cur); });
                worst = std::max(worst, testutil::rel_err(analytic[si][ti](k), fd, 1e-6));
            }
    return worst;
}

}  // namespace checks
