#pragma once

#include "driftcast/forecasters.hpp"
#include "driftcast/linalg.hpp"
#include "driftcast/nn/checkpoint.hpp"
#include "driftcast/nn/network.hpp"
#include "driftcast/seriesdata.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace driftcast::adapt {

struct ConceptVector {
    Vector values;
};

struct DriftVector {
    Vector values;
};

enum class Aggregation { Average, Linear, Weighted };

[[nodiscard]] const char* to_string(Aggregation mode) noexcept;
[[nodiscard]] Aggregation aggregation_from_string(const std::string& s);

/// Combines N per-variate feature rows (N x d_c) into one concept.
///  - Average: row mean.
///  - Linear: concatenation of the rows in variate order times `weights`
///    ((N*d_c) x d_c).
///  - Weighted: sum of rows scaled by `weights` (length N).
[[nodiscard]] ConceptVector aggregate_concepts(const Matrix& features, Aggregation mode,
                                               const Matrix& weights = {});

/**
 * Concept encoder: a per-variate MLP (linear, GeLU, linear, with biases)
 * shared across variates, followed by aggregation over variates.
 *
 * The training-side encoder reads x || y (input length L + H); the test-side
 * encoder reads the lookback only (input length L).
 */
class ConceptEncoder {
public:
    ConceptEncoder() = default;
    ConceptEncoder(int input_len, int concept_dim, Aggregation mode, int n_variates, std::uint64_t seed);

    [[nodiscard]] int input_len() const noexcept { return input_len_; }
    [[nodiscard]] int concept_dim() const noexcept { return concept_dim_; }
    [[nodiscard]] Aggregation mode() const noexcept { return mode_; }
    [[nodiscard]] int n_variates() const noexcept { return n_variates_; }
    [[nodiscard]] const nn::Network& network() const noexcept { return mlp_; }
    [[nodiscard]] nn::Network& network() noexcept { return mlp_; }
    [[nodiscard]] const nn::ParamStore& params() const noexcept { return mlp_.params(); }
    [[nodiscard]] nn::ParamStore& params() noexcept { return mlp_.params(); }
    /// Aggregation weights ((N*d_c) x d_c for Linear, 1 x N for Weighted); empty for Average.
    [[nodiscard]] Matrix aggregation_weights() const;

    struct Batch {
        nn::ForwardCache mlp;
        Matrix concepts;  // B x d_c
        std::size_t batch = 0;
    };

    /// `rows` stacks B items of N variate rows each.
    [[nodiscard]] Batch forward(const Matrix& rows, std::size_t batch) const;
    /// Accumulates gradients given d loss / d concepts (B x d_c).
    void backward(const Batch& fwd, const Matrix& d_concepts);

    /// Single item: N x input_len rows to one concept.
    [[nodiscard]] ConceptVector encode(const Matrix& rows) const;

    [[nodiscard]] nn::CheckpointSection to_checkpoint(const std::string& tag) const;
    [[nodiscard]] static ConceptEncoder from_checkpoint(const nn::CheckpointSection& section);

private:
    int input_len_ = 0;
    int concept_dim_ = 0;
    Aggregation mode_ = Aggregation::Average;
    int n_variates_ = 0;
    int agg_param_ = -1;
    nn::Network mlp_;
};

/// Concept of one or more labeled samples, averaged over samples.
[[nodiscard]] ConceptVector encode_train_concept(const ConceptEncoder& enc,
                                                 std::span<const data::WindowSample> samples);
/// Concept of a lookback window.
[[nodiscard]] ConceptVector encode_test_concept(const ConceptEncoder& enc, const Matrix& x);

/// delta = c_to - c_from.
[[nodiscard]] DriftVector estimate_drift(const ConceptVector& c_to, const ConceptVector& c_from);

/// Rescaling vectors for one parameter. alpha is empty for bias parameters.
struct LayerCoefficients {
    Vector alpha;
    Vector beta;
};

/// Indexed by parameter position in the forecast model.
struct AdaptationCoefficients {
    std::vector<LayerCoefficients> layers;

    /// All-ones coefficients for every parameter of the registry.
    [[nodiscard]] static AdaptationCoefficients identity(const models::ForecastModel& model);
};

/**
 * Bottleneck coefficient generator.
 *
 * For parameter l of layer type k:
 *     [alpha; beta] = W2_k^T sigmoid(W1_k^T u + b_l) + 1
 * with W1_k stored d_c x r, W2_k stored r x (d_in + d_out) and one bias b_l
 * per parameter. Bias parameters use d_in = 0. In the unshared layout every
 * parameter owns its W1 and W2. W2 starts at zero, so a fresh generator
 * returns all-ones coefficients.
 */
class CoeffGenerator {
public:
    CoeffGenerator() = default;
    CoeffGenerator(const models::LayerTypeRegistry& registry, int concept_dim, int rank,
                   bool shared, std::uint64_t seed);

    [[nodiscard]] int concept_dim() const noexcept { return concept_dim_; }
    [[nodiscard]] int rank() const noexcept { return rank_; }
    [[nodiscard]] bool shared() const noexcept { return shared_; }
    [[nodiscard]] std::size_t n_layers() const noexcept { return layers_.size(); }
    [[nodiscard]] const nn::ParamStore& params() const noexcept { return store_; }
    [[nodiscard]] nn::ParamStore& params() noexcept { return store_; }

    /// Parameter indices in params() for layer l.
    [[nodiscard]] int w1_index(std::size_t layer) const { return layers_.at(layer).w1; }
    [[nodiscard]] int w2_index(std::size_t layer) const { return layers_.at(layer).w2; }
    [[nodiscard]] int bias_index(std::size_t layer) const { return layers_.at(layer).b; }

    struct Batch {
        Matrix input;                // B x d_c
        std::vector<Matrix> hidden;  // per layer, B x r (post-sigmoid)
        std::vector<Matrix> coeffs;  // per layer, B x (d_in + d_out)
    };

    [[nodiscard]] Batch forward(const Matrix& inputs) const;
    /// Accumulates generator gradients and returns d loss / d inputs.
    Matrix backward(const Batch& fwd, const std::vector<Matrix>& d_coeffs);

    [[nodiscard]] nn::CheckpointSection to_checkpoint(const std::string& tag) const;
    [[nodiscard]] static CoeffGenerator from_checkpoint(const nn::CheckpointSection& section,
                                                        const models::LayerTypeRegistry& registry);

private:
    struct Layer {
        int d_in = 0;  // 0 for bias parameters
        int d_out = 0;
        int w1 = -1;
        int w2 = -1;
        int b = -1;
    };
    void check_registry(const models::LayerTypeRegistry& registry) const;

    int concept_dim_ = 0;
    int rank_ = 0;
    bool shared_ = true;
    std::vector<Layer> layers_;
    nn::ParamStore store_;
    friend AdaptationCoefficients generate_coefficients(const CoeffGenerator&, const DriftVector&,
                                                        const models::LayerTypeRegistry&);
};

/// Coefficients for a single drift vector.
[[nodiscard]] AdaptationCoefficients generate_coefficients(const CoeffGenerator& gen,
                                                           const DriftVector& drift,
                                                           const models::LayerTypeRegistry& registry);

/// Materialized form: (alpha^T beta) (elementwise) theta; every conv kernel slice gets
/// the same outer product; a bias gets beta (elementwise) theta.
[[nodiscard]] nn::ParamTensor materialize_adapted(const nn::ParamTensor& theta, const Vector& alpha,
                                                  const Vector& beta);

/// Expands per-item coefficients into per-row modulation (N rows per item).
[[nodiscard]] nn::Modulation build_modulation(const models::ForecastModel& model,
                                              std::span<const AdaptationCoefficients> coeffs);
[[nodiscard]] nn::Modulation build_modulation(const models::ForecastModel& model,
                                              const CoeffGenerator::Batch& gen);

/// Forecasts of each item under its own coefficients without
/// materializing adapted parameters. The base parameters are not modified.
[[nodiscard]] std::vector<Matrix> adapted_forward(const models::ForecastModel& model,
                                                  std::span<const AdaptationCoefficients> coeffs,
                                                  std::span<const Matrix> xs);

/// Generator size: sum over layer types of r*d_c + r*(d_in + d_out), plus r per layer.
[[nodiscard]] std::int64_t adapter_param_count(const CoeffGenerator& gen,
                                               const models::LayerTypeRegistry& registry);
/// Size of a dense map from a d_c vector to every model parameter.
[[nodiscard]] std::int64_t naive_dense_param_count(const models::LayerTypeRegistry& registry,
                                                   int concept_dim);

// ---------------------------------------------------------------------------

/// Input of the coefficient generator.
enum class GeneratorInput {
    Drift,        // c_test - c_train
    TestConcept,  // c_test alone
};

/// Which encoder yields the concept of labeled (training) samples.
enum class TrainConceptSource {
    TrainEncoderXY,       // E over x || y
    TestEncoderLookback,  // E' over x
};

struct AdapterConfig {
    int concept_dim = 100;
    int rank = 32;
    Aggregation aggregation = Aggregation::Average;
    bool shared_generator = true;
    GeneratorInput input = GeneratorInput::Drift;
    TrainConceptSource train_concept = TrainConceptSource::TrainEncoderXY;
    /// Encoder for the previous batch during joint training. Only differs from
    /// train_concept when explicitly set to TestEncoderLookback.
    TrainConceptSource prev_batch = TrainConceptSource::TrainEncoderXY;

    friend bool operator==(const AdapterConfig&, const AdapterConfig&) = default;
};

/**
 * Concept encoders plus coefficient generator for one forecast model.
 */
class DriftAdapter {
public:
    DriftAdapter(const models::ForecastModel& model, AdapterConfig config, std::uint64_t seed);
    DriftAdapter(AdapterConfig config, ConceptEncoder train_encoder, ConceptEncoder test_encoder,
                 CoeffGenerator generator);

    [[nodiscard]] const AdapterConfig& config() const noexcept { return config_; }
    [[nodiscard]] const ConceptEncoder& train_encoder() const noexcept { return train_enc_; }
    [[nodiscard]] ConceptEncoder& train_encoder() noexcept { return train_enc_; }
    [[nodiscard]] const ConceptEncoder& test_encoder() const noexcept { return test_enc_; }
    [[nodiscard]] ConceptEncoder& test_encoder() noexcept { return test_enc_; }
    [[nodiscard]] const CoeffGenerator& generator() const noexcept { return gen_; }
    [[nodiscard]] CoeffGenerator& generator() noexcept { return gen_; }

    /// Stores that train with the adapter (E is omitted when unused).
    [[nodiscard]] std::vector<nn::ParamStore*> trainable_stores();
    [[nodiscard]] std::uint64_t checksum() const noexcept;
    [[nodiscard]] std::int64_t encoder_param_count() const noexcept;

    [[nodiscard]] ConceptVector train_concept(const data::WindowSample& sample) const;
    [[nodiscard]] ConceptVector test_concept(const Matrix& x) const;
    /// Generator input for a (train concept, test concept) pair.
    [[nodiscard]] Vector generator_input(const ConceptVector& c_train, const ConceptVector& c_test) const;
    [[nodiscard]] AdaptationCoefficients coefficients(const Vector& generator_input,
                                                      const models::LayerTypeRegistry& registry) const;

    [[nodiscard]] nn::Checkpoint to_checkpoint() const;
    [[nodiscard]] static DriftAdapter from_checkpoint(const nn::Checkpoint& ckpt,
                                                      const models::LayerTypeRegistry& registry);

private:
    AdapterConfig config_;
    ConceptEncoder train_enc_;
    ConceptEncoder test_enc_;
    CoeffGenerator gen_;
};

/// Stacks x || y of each sample (per variate) as B*N rows.
[[nodiscard]] Matrix stack_xy(std::span<const data::WindowSample> samples);
[[nodiscard]] Matrix stack_x(std::span<const data::WindowSample> samples);

/**
 * One joint training step on batch `current`, with the concept of `previous`
 * as the reference (an empty `previous` means zero drift). Returns the mean
 * per-sample MSE and accumulates gradients for the model and every adapter
 * store.
 */
double joint_loss_and_grad(models::ForecastModel& model, DriftAdapter& adapter,
                           std::span<const data::WindowSample> previous,
                           std::span<const data::WindowSample> current);

/// Same loss without touching gradients.
[[nodiscard]] double joint_loss(const models::ForecastModel& model, const DriftAdapter& adapter,
                                std::span<const data::WindowSample> previous,
                                std::span<const data::WindowSample> current);

}  // namespace driftcast::adapt
