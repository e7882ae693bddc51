#include "driftcast/adapter.hpp"
#include "driftcast/errors.hpp"
#include "checks.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>
#include <sstream>

using namespace driftcast;
using namespace driftcast::adapt;
using testutil::random_matrix;

namespace {

/// One 1x1 linear layer model.
models::ForecastModel unit_model() {
    nn::ParamStore s;
    nn::ParamTensor w("w", nn::ParamShape::linear(1, 1), 0);
    w.values(0) = 1.0;
    s.add(std::move(w));
    return models::ForecastModel(nn::Network(std::move(s), nn::Wiring{1, {nn::LinearOp{0}}}), {1, 1, 1}, false,
                                 models::ModelKind::Custom);
}

/// Store with `k` linear(d_in, d_out) layers of one type; enough for a registry.
models::LayerTypeRegistry uniform_registry(int k, int d_in, int d_out) {
    nn::ParamStore s;
    for (int i = 0; i < k; ++i) s.add(nn::ParamTensor("l" + std::to_string(i), nn::ParamShape::linear(d_in, d_out), 0));
    return models::LayerTypeRegistry::from_store(s);
}

void zero_all(nn::ParamStore& s) {
    for (std::size_t i = 0; i < s.size(); ++i) s.mutate(i).values.setZero();
}

Matrix features_of(const ConceptEncoder& enc, const Matrix& rows) { return nn::forward(enc.network(), rows).output; }

}  // namespace

TEST_CASE("aggregation modes") {
    std::mt19937_64 rng(1);
    const Vector v = testutil::random_vector(rng, 5);
    Matrix two(2, 5);
    two.row(0) = v.transpose();
    two.row(1) = v.transpose();
    CHECK((aggregate_concepts(two, Aggregation::Average).values - v).cwiseAbs().maxCoeff() < 1e-15);

    const Matrix f = random_matrix(rng, 3, 5);
    const Vector avg = aggregate_concepts(f, Aggregation::Average).values;
    Matrix w(1, 3);
    w << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    CHECK((aggregate_concepts(f, Aggregation::Weighted, w).values - avg).cwiseAbs().maxCoeff() < 1e-14);
    Matrix half(1, 2);
    half << 0.5, 0.5;
    CHECK((aggregate_concepts(f.topRows(2), Aggregation::Weighted, half).values -
           aggregate_concepts(f.topRows(2), Aggregation::Average).values)
              .cwiseAbs()
              .maxCoeff() < 1e-15);

    // stacked identities scaled by 1/N reproduce the average
    Matrix W(15, 5);
    for (int i = 0; i < 3; ++i) W.middleRows(i * 5, 5) = Matrix::Identity(5, 5) / 3.0;
    CHECK((aggregate_concepts(f, Aggregation::Linear, W).values - avg).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS((void)aggregate_concepts(f, Aggregation::Weighted, half), ModeDimMismatch);
    CHECK_THROWS_AS((void)aggregate_concepts(f, Aggregation::Linear, W.topRows(10)), ModeDimMismatch);
}

TEST_CASE("concept encoders") {
    std::mt19937_64 rng(2);
    SUBCASE("zero network gives zero concept") {
        ConceptEncoder e(6, 4, Aggregation::Average, 1, 3);
        zero_all(e.params());
        CHECK(e.encode(random_matrix(rng, 1, 6)).values.isZero(0.0));
    }
    SUBCASE("identical variates match a single variate") {
        ConceptEncoder e(6, 4, Aggregation::Average, 2, 3);
        const Matrix row = random_matrix(rng, 1, 6);
        Matrix rows(2, 6);
        rows << row, row;
        CHECK((e.encode(rows).values - e.encode(row).values).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("average is permutation invariant") {
        ConceptEncoder e(5, 3, Aggregation::Average, 4, 1);
        const Matrix rows = random_matrix(rng, 4, 5);
        Matrix flipped = rows;
        flipped.row(0).swap(flipped.row(3));
        CHECK((e.encode(rows).values - e.encode(flipped).values).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("weighted (1, 0) selects the first variate") {
        ConceptEncoder e(5, 3, Aggregation::Weighted, 2, 1);
        auto& w = e.params().mutate(static_cast<std::size_t>(e.params().index_of("agg.weight")));
        w.values << 1.0, 0.0;
        const Matrix rows = random_matrix(rng, 2, 5);
        const Matrix f = features_of(e, rows);
        CHECK((e.encode(rows).values - f.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK_THROWS_AS((void)e.encode(random_matrix(rng, 3, 5)), ModeDimMismatch);
    }
    SUBCASE("linear aggregation starts as the average") {
        ConceptEncoder lin(5, 3, Aggregation::Linear, 3, 9);
        ConceptEncoder avg(5, 3, Aggregation::Average, 3, 9);
        const Matrix rows = random_matrix(rng, 3, 5);
        CHECK((lin.encode(rows).values - avg.encode(rows).values).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("arity") {
        ConceptEncoder e(5, 3, Aggregation::Average, 1, 1);
        CHECK_THROWS_AS((void)e.encode(random_matrix(rng, 1, 6)), ArityMismatch);
    }
    SUBCASE("multi-sample concept is the mean of single-sample concepts") {
        const int L = 6, H = 2;
        ConceptEncoder e(L + H, 4, Aggregation::Average, 2, 5);
        testutil::randomize(e.params(), rng);
        const data::SeriesFrame frame(random_matrix(rng, 2, 30), {"a", "b"});
        const auto w = data::make_windows(frame, L, H, 10, 12);
        REQUIRE(w.size() == 3);
        const Vector batch = encode_train_concept(e, w).values;
        Vector mean = Vector::Zero(4);
        for (const auto& s : w) mean += encode_train_concept(e, std::span(&s, 1)).values / 3.0;
        CHECK((batch - mean).cwiseAbs().maxCoeff() < 1e-12);

        ConceptEncoder ep(L, 4, Aggregation::Average, 2, 6);
        CHECK_THROWS_AS((void)encode_train_concept(ep, w), ArityMismatch);
        CHECK(encode_test_concept(ep, w[0].x).values.size() == 4);
    }
}

TEST_CASE("drift") {
    ConceptVector a{(Vector(2) << 3, 1).finished()};
    ConceptVector b{(Vector(2) << 1, 1).finished()};
    CHECK(estimate_drift(a, b).values == (Vector(2) << 2, 0).finished());
    CHECK(estimate_drift(a, a).values.isZero(0.0));
    CHECK(estimate_drift(a, b).values == -estimate_drift(b, a).values);
    CHECK_THROWS_AS((void)estimate_drift(a, ConceptVector{Vector::Zero(3)}), DimMismatch);
}

TEST_CASE("coefficients: hand-evaluated example") {
    const auto model = unit_model();
    CoeffGenerator gen(model.registry(), 1, 1, true, 0);
    auto& p = gen.params();
    p.mutate(static_cast<std::size_t>(gen.w1_index(0))).values << 2.0;
    p.mutate(static_cast<std::size_t>(gen.bias_index(0))).values << 0.0;
    p.mutate(static_cast<std::size_t>(gen.w2_index(0))).values << 0.5, 0.5;
    const auto c = generate_coefficients(gen, DriftVector{Vector::Zero(1)}, model.registry());
    // sigmoid(2*0 + 0) = 0.5; 0.5*0.5 + 1
    CHECK(c.layers[0].alpha(0) == 1.25);
    CHECK(c.layers[0].beta(0) == 1.25);
}

TEST_CASE("coefficients at init are exactly one") {
    std::mt19937_64 rng(3);
    for (int family = 0; family < 3; ++family) {
        const auto model = checks::random_model(rng, family);
        for (bool shared : {true, false}) {
            const CoeffGenerator gen(model.registry(), 7, 3, shared, rng());
            const auto c = generate_coefficients(gen, DriftVector{testutil::random_vector(rng, 7, 5.0)}, model.registry());
            REQUIRE(c.layers.size() == model.params().size());
            for (std::size_t i = 0; i < c.layers.size(); ++i) {
                const auto& t = model.params()[i];
                CHECK(c.layers[i].beta.size() == t.shape.d_out);
                CHECK(c.layers[i].alpha.size() == (t.shape.kind == nn::ParamKind::Bias ? 0 : t.shape.d_in));
                CHECK((c.layers[i].alpha.array() == 1.0).all());
                CHECK((c.layers[i].beta.array() == 1.0).all());
            }
        }
    }
}

TEST_CASE("sharing contract") {
    std::mt19937_64 rng(4);
    const auto model = models::build_mlp(1, 16, 4, 16, false, 1);  // input and hidden linears share a type
    const auto& reg = model.registry();
    CoeffGenerator gen(reg, 6, 3, true, 2);
    testutil::randomize(gen.params(), rng);
    const DriftVector d{testutil::random_vector(rng, 6)};
    const auto base = generate_coefficients(gen, d, reg);

    const int in_w = model.params().index_of("input.weight");
    const int hid_w = model.params().index_of("hidden.weight");
    REQUIRE(reg.type_of(in_w) == reg.type_of(hid_w));
    // shared W1/W2, distinct biases -> distinct coefficients
    CHECK((base.layers[in_w].alpha - base.layers[hid_w].alpha).cwiseAbs().maxCoeff() > 1e-6);
    CHECK(gen.w1_index(static_cast<std::size_t>(in_w)) == gen.w1_index(static_cast<std::size_t>(hid_w)));
    CHECK(gen.bias_index(static_cast<std::size_t>(in_w)) != gen.bias_index(static_cast<std::size_t>(hid_w)));

    auto diff = [&](const AdaptationCoefficients& a, std::size_t l) {
        return (a.layers[l].alpha - base.layers[l].alpha).cwiseAbs().sum() +
               (a.layers[l].beta - base.layers[l].beta).cwiseAbs().sum();
    };
    SUBCASE("W1 of one type touches only that type") {
        CoeffGenerator g2 = gen;
        g2.params().mutate(static_cast<std::size_t>(g2.w1_index(static_cast<std::size_t>(in_w)))).values.array() += 0.3;
        const auto c = generate_coefficients(g2, d, reg);
        for (std::size_t l = 0; l < c.layers.size(); ++l) {
            if (reg.type_of(static_cast<int>(l)) == reg.type_of(in_w)) CHECK(diff(c, l) > 0.0);
            else CHECK(diff(c, l) == 0.0);
        }
    }
    SUBCASE("W2 of one type touches only that type") {
        CoeffGenerator g2 = gen;
        g2.params().mutate(static_cast<std::size_t>(g2.w2_index(static_cast<std::size_t>(in_w)))).values.array() += 0.3;
        const auto c = generate_coefficients(g2, d, reg);
        for (std::size_t l = 0; l < c.layers.size(); ++l)
            if (reg.type_of(static_cast<int>(l)) != reg.type_of(in_w)) CHECK(diff(c, l) == 0.0);
    }
    SUBCASE("a layer bias touches only that layer") {
        CoeffGenerator g2 = gen;
        g2.params().mutate(static_cast<std::size_t>(g2.bias_index(static_cast<std::size_t>(hid_w)))).values.array() += 0.3;
        const auto c = generate_coefficients(g2, d, reg);
        for (std::size_t l = 0; l < c.layers.size(); ++l) {
            if (static_cast<int>(l) == hid_w) CHECK(diff(c, l) > 0.0);
            else CHECK(diff(c, l) == 0.0);
        }
    }
}

TEST_CASE("coefficients are Lipschitz in the drift") {
    // |sigmoid'| <= 1/4, so |c(d1) - c(d2)| <= |W2|_F |W1|_F / 4 * |d1 - d2|
    std::mt19937_64 rng(5);
    const auto model = models::build_mlp(1, 8, 3, 6, false, 1);
    const auto& reg = model.registry();
    CoeffGenerator gen(reg, 5, 4, true, 3);
    testutil::randomize(gen.params(), rng, 1.0);
    for (int probe = 0; probe < 50; ++probe) {
        const Vector d1 = testutil::random_vector(rng, 5, 2.0);
        const Vector d2 = d1 + testutil::random_vector(rng, 5, 0.1);
        const auto c1 = generate_coefficients(gen, DriftVector{d1}, reg);
        const auto c2 = generate_coefficients(gen, DriftVector{d2}, reg);
        const auto again = generate_coefficients(gen, DriftVector{d1}, reg);
        for (std::size_t l = 0; l < c1.layers.size(); ++l) {
            const double k = gen.params()[static_cast<std::size_t>(gen.w1_index(l))].values.norm() *
                             gen.params()[static_cast<std::size_t>(gen.w2_index(l))].values.norm() / 4.0;
            Vector a(c1.layers[l].alpha.size() + c1.layers[l].beta.size());
            Vector b(a.size());
            a << c1.layers[l].alpha, c1.layers[l].beta;
            b << c2.layers[l].alpha, c2.layers[l].beta;
            CHECK((a - b).norm() <= k * (d1 - d2).norm() + 1e-12);
            CHECK(again.layers[l].beta == c1.layers[l].beta);
        }
    }
}

TEST_CASE("materialization") {
    nn::ParamTensor t("w", nn::ParamShape::linear(2, 2), 0);
    t.values << 1, 2, 3, 4;
    const Vector alpha = (Vector(2) << 2, 1).finished();
    const Vector beta = (Vector(2) << 1, 3).finished();
    const auto adapted = materialize_adapted(t, alpha, beta);
    CHECK(adapted.values == (Vector(4) << 2, 12, 3, 12).finished());
    CHECK(t.values == (Vector(4) << 1, 2, 3, 4).finished());
    CHECK(materialize_adapted(t, Vector::Ones(2), Vector::Ones(2)).values == t.values);
    CHECK_THROWS_AS((void)materialize_adapted(t, Vector::Ones(3), beta), DimMismatch);

    nn::ParamTensor b("b", nn::ParamShape::bias(3), 0);
    b.values << 1, 2, 3;
    CHECK(materialize_adapted(b, Vector(), (Vector(3) << 2, 0, -1).finished()).values ==
          (Vector(3) << 2, 0, -3).finished());

    SUBCASE("every conv kernel slice gets the same outer product") {
        std::mt19937_64 rng(7);
        nn::ParamTensor c("c", nn::ParamShape::conv(3, 2, 3), 0);
        c.values = testutil::random_vector(rng, c.values.size());
        const Vector a = testutil::random_vector(rng, 3), be = testutil::random_vector(rng, 2);
        const auto out = materialize_adapted(c, a, be);
        for (int k = 0; k < 3; ++k) {
            nn::ParamTensor slice("s", nn::ParamShape::linear(3, 2), 0);
            slice.matrix() = c.matrix(k);
            const auto ref = materialize_adapted(slice, a, be);
            CHECK(out.matrix(k) == ref.matrix());
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 2; ++j) CHECK(out.matrix(k)(i, j) == a(i) * be(j) * c.matrix(k)(i, j));
        }
    }
}

TEST_CASE("identity at init") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) CHECK(checks::identity_at_init(rng, trial));
}

TEST_CASE("functional path equals materialized path") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto e = checks::functional_vs_materialized(rng, trial);
        CHECK(e.output < 1e-6);
        CHECK(e.gradient < 1e-4);
    }
}

TEST_CASE("adapted forward") {
    std::mt19937_64 rng(17);
    auto model = models::build_mlp(2, 6, 3, 5, false, 1);
    testutil::randomize(model.params(), rng);
    const Matrix x = random_matrix(rng, 2, 6);
    const std::vector<Matrix> xs{x, x};
    const std::vector<AdaptationCoefficients> ones{AdaptationCoefficients::identity(model)};
    const std::uint64_t before = model.params().checksum();
    CHECK(adapted_forward(model, ones, std::span(xs).first(1))[0] == model.forecast(x));
    CHECK_THROWS_AS((void)adapted_forward(model, ones, xs), BatchArityMismatch);
    const std::vector<AdaptationCoefficients> cs{checks::random_coefficients(model, rng),
                                                 checks::random_coefficients(model, rng)};
    (void)adapted_forward(model, cs, xs);
    CHECK(model.params().checksum() == before);
}

TEST_CASE("generator checks its registry") {
    const auto a = models::build_mlp(1, 8, 3, 6, false, 1);
    const auto b = models::build_mlp(1, 8, 4, 6, false, 1);
    const CoeffGenerator gen(a.registry(), 4, 2, true, 0);
    CHECK_THROWS_AS((void)generate_coefficients(gen, DriftVector{Vector::Zero(4)}, b.registry()), RegistryMismatch);
    CHECK_THROWS_AS((void)generate_coefficients(gen, DriftVector{Vector::Zero(5)}, a.registry()), DimMismatch);
    CHECK_THROWS((void)CoeffGenerator(a.registry(), 4, 0, true, 0));
}

TEST_CASE("parameter counts") {
    const auto reg = uniform_registry(4, 64, 32);
    const CoeffGenerator gen(reg, 100, 32, true, 0);
    // r*d_c + r*(d_in + d_out) once for the type, plus r per layer
    CHECK(adapter_param_count(gen, reg) == 32 * 100 + 32 * 96 + 4 * 32);
    CHECK(adapter_param_count(gen, reg) == 6400);
    CHECK(adapter_param_count(gen, reg) == gen.params().parameter_count());
    CHECK(naive_dense_param_count(reg, 100) == 100 * (64 * 32) * 4);
    CHECK(naive_dense_param_count(reg, 100) == 819200);

    const CoeffGenerator unshared(reg, 100, 32, false, 0);
    CHECK(adapter_param_count(unshared, reg) == 4 * (32 * 100 + 32 * 96) + 4 * 32);
    CHECK(adapter_param_count(unshared, reg) > adapter_param_count(gen, reg));
}

TEST_CASE("joint gradient matches finite differences") {
    std::mt19937_64 rng(19);
    AdapterConfig cfg;
    CHECK(checks::joint_gradient_error(rng, 1, 8, 2, 4, 2, cfg) < 1e-4);
    SUBCASE("aggregation modes") {
        for (auto mode : {Aggregation::Linear, Aggregation::Weighted}) {
            AdapterConfig c = cfg;
            c.aggregation = mode;
            CHECK(checks::joint_gradient_error(rng, 2, 6, 2, 3, 2, c) < 1e-4);
        }
    }
    SUBCASE("variants") {
        AdapterConfig c = cfg;
        c.input = GeneratorInput::TestConcept;
        CHECK(checks::joint_gradient_error(rng, 2, 6, 2, 3, 2, c) < 1e-4);
        c = cfg;
        c.train_concept = TrainConceptSource::TestEncoderLookback;
        c.prev_batch = TrainConceptSource::TestEncoderLookback;
        CHECK(checks::joint_gradient_error(rng, 2, 6, 2, 3, 2, c) < 1e-4);
        c = cfg;
        c.prev_batch = TrainConceptSource::TestEncoderLookback;
        CHECK(checks::joint_gradient_error(rng, 2, 6, 2, 3, 2, c) < 1e-4);
        c = cfg;
        c.shared_generator = false;
        CHECK(checks::joint_gradient_error(rng, 1, 6, 3, 3, 2, c) < 1e-4);
    }
}

TEST_CASE("adapter checkpoint round trip") {
    std::mt19937_64 rng(23);
    const auto model = models::build_mlp(2, 8, 3, 6, false, 1);
    for (auto mode : {Aggregation::Average, Aggregation::Linear, Aggregation::Weighted}) {
        AdapterConfig cfg;
        cfg.concept_dim = 5;
        cfg.rank = 3;
        cfg.aggregation = mode;
        cfg.shared_generator = mode != Aggregation::Linear;
        DriftAdapter a(model, cfg, 4);
        testutil::randomize(a.generator().params(), rng);
        std::stringstream ss;
        nn::write_checkpoint(ss, a.to_checkpoint());
        const auto b = DriftAdapter::from_checkpoint(nn::read_checkpoint(ss), model.registry());
        CHECK(b.checksum() == a.checksum());
        CHECK(b.config() == a.config());
    }
}
