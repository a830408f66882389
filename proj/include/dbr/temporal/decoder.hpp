#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/nncore/optim.hpp"
#include "dbr/nncore/serialize.hpp"
#include "dbr/temporal/lstm.hpp"

namespace dbr::temporal {

/// T x D per-frame features.
struct FeatureSequence {
    nn::Tensor values;
    std::vector<double> timestamps;

    std::size_t steps() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
};

/// Bidirectional layer: forward and backward cells plus the output mix
/// o_t = tanh(mix_forward s_f(t) + mix_backward s_b(t) + mix_bias).
struct BiLstmLayer {
    BiLstmLayer() = default;
    BiLstmLayer(std::size_t index, std::size_t input_width, std::size_t hidden, std::mt19937_64& rng);

    LstmCellParams forward_cell;
    LstmCellParams backward_cell;
    nn::Parameter mix_forward;
    nn::Parameter mix_backward;
    nn::Parameter mix_bias;

    std::vector<nn::Parameter*> parameters();
};

/// Per-step states of one layer, time-major ([T*N x h], row t*N + n).
struct LayerStates {
    nn::Var forward;
    nn::Var backward;
    nn::Var outputs;  // invalid when outputs were not requested
    std::vector<nn::Var> forward_steps;
    std::vector<nn::Var> backward_steps;
};

/// Runs one layer over a time-major batch [T*N x D].
LayerStates birnn_forward(nn::Graph& graph, BiLstmLayer& layer, nn::Var inputs, std::size_t steps,
                          std::size_t batch, bool with_outputs);

struct DecoderConfig {
    std::size_t input_width = 530;
    std::size_t hidden = 150;
    std::size_t layers = 2;
    std::size_t num_classes = 3;
    /// Head reads the mean over time of [s_f(t); s_b(t)] instead of [s_f(T); s_b(1)].
    bool mean_pool = false;

    void validate() const;
};

/// Per-dimension affine input normalization fitted on training sequences.
struct InputScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const noexcept { return mean.empty(); }
    nn::Tensor apply(const nn::Tensor& values) const;
};

/// Mean and population std per dimension; constant dimensions keep scale 1.
InputScaler fit_input_scaler(std::span<const FeatureSequence> sequences);

nlohmann::ordered_json to_json(const DecoderConfig& config);
DecoderConfig decoder_config_from_json(const nlohmann::json& j, DecoderConfig defaults = {});

class BiLstmDecoder {
public:
    BiLstmDecoder(DecoderConfig config, std::uint64_t seed);

    const DecoderConfig& config() const noexcept { return config_; }
    std::vector<nn::Parameter*> parameters();
    std::vector<BiLstmLayer>& layers() noexcept { return layers_; }

    /// Normalization applied by predict() and by training; empty means identity.
    const InputScaler& scaler() const noexcept { return scaler_; }
    void set_scaler(InputScaler scaler);
    nn::Tensor normalize(const nn::Tensor& values) const { return scaler_.empty() ? values : scaler_.apply(values); }

    /// Logits [N x K] for a time-major batch [T*N x D] of normalized inputs.
    nn::Var forward(nn::Graph& graph, nn::Var inputs, std::size_t steps, std::size_t batch);

    /// Softmax over classes for one sequence; a pure function of weights and input.
    std::vector<double> predict(const FeatureSequence& sequence) const;

    nn::Checkpoint to_checkpoint(const std::string& method) const;
    static BiLstmDecoder from_checkpoint(const nn::Checkpoint& checkpoint);

private:
    DecoderConfig config_;
    std::uint64_t seed_;
    std::vector<BiLstmLayer> layers_;
    nn::Parameter head_weight_;
    nn::Parameter head_bias_;
    InputScaler scaler_;
};

/// Packs same-length sequences into one time-major [T*N x D] tensor.
nn::Tensor time_major_batch(std::span<const FeatureSequence* const> sequences);

struct DecoderTrainOptions {
    int epochs = 500;
    int batch_size = 32;
    nn::LrSchedule schedule{0.1, 0.5, 50};
    std::uint64_t seed = 0;
    /// Stop once the epoch's mean training loss falls below this (0 disables).
    double early_stop_loss = 0.0;
    /// Fit the decoder's input scaler on the training sequences before training.
    bool standardize_inputs = true;
};

struct DecoderEpoch {
    int epoch = 0;
    double rate = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct DecoderTrainResult {
    std::vector<DecoderEpoch> log;
    /// Predictions for the training sequences from the trained weights.
    std::vector<int> train_predictions;
};

using DecoderEpochCallback = std::function<void(const DecoderEpoch&)>;

/// Cross-entropy training with Adam under the step schedule. Sequences are
/// grouped by length; each epoch shuffles within groups and then the batches.
DecoderTrainResult train_decoder(BiLstmDecoder& decoder, std::span<const FeatureSequence> sequences,
                                 std::span<const int> labels, const DecoderTrainOptions& options,
                                 const DecoderEpochCallback& on_epoch = {});

int predicted_class(const std::vector<double>& distribution);

}  // namespace dbr::temporal
