#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/dataset/types.hpp"
#include "dbr/nncore/graph.hpp"
#include "dbr/nncore/serialize.hpp"

namespace dbr::enc {

struct ConvBlockConfig {
    int channels = 16;
    int kernel = 3;
    int stride = 1;
};

struct EncoderConfig {
    int input_side = 64;
    /// Each block is conv (same padding) -> ReLU -> max-pool.
    std::vector<ConvBlockConfig> blocks{{16, 3, 1}, {32, 3, 1}, {64, 3, 1}, {128, 3, 1}};
    int pool = 2;
    /// Width of the penultimate layer handed to the decoders.
    int feature_width = 512;
    int num_classes = 8;
    double conv_lr_multiplier = 1.0;
    double head_lr_multiplier = 20.0;

    void validate() const;
    /// Side length of the trunk output (after the last pool).
    int trunk_side() const;
    std::size_t trunk_width() const;
};

nlohmann::ordered_json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig defaults = {});

/// Pixel scaling shared by training and inference: (p - 128) / 128.
double normalize_pixel(std::uint8_t p);
nn::Tensor frame_tensor(const data::GrayImage& image);

class EncoderModel {
public:
    EncoderModel(EncoderConfig config, std::uint64_t seed);

    const EncoderConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    std::vector<nn::Parameter*> conv_parameters();

    struct Outputs {
        nn::Var features;
        nn::Var logits;
    };
    /// Differentiable pass over a batch [N x 1 x S x S].
    Outputs forward(nn::Graph& graph, nn::Var images);

    struct Activations {
        nn::Tensor features;
        nn::Tensor logits;
    };
    /// Tape-free pass over one normalized frame [1 x S x S].
    Activations infer(const nn::Tensor& frame) const;

    nn::Checkpoint to_checkpoint() const;
    static EncoderModel from_checkpoint(const nn::Checkpoint& checkpoint);

private:
    EncoderConfig config_;
    std::uint64_t seed_;
    std::vector<nn::Parameter> kernels_;
    std::vector<nn::Parameter> conv_bias_;
    nn::Parameter hidden_weight_;
    nn::Parameter hidden_bias_;
    nn::Parameter out_weight_;
    nn::Parameter out_bias_;
};

/// Softmax distribution over the behavior classes.
std::vector<double> classify_frame(const EncoderModel& model, const data::GrayImage& frame);
/// Penultimate-layer activation.
nn::Tensor extract_features(const EncoderModel& model, const data::GrayImage& frame);

struct OcclusionMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int patch = 8;
    int stride = 4;
    int target = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Drop in the target's pre-softmax score when a patch is replaced by `fill`.
OcclusionMap occlusion_sensitivity(const EncoderModel& model, const data::GrayImage& frame, int target_class,
                                   int patch = 8, int stride = 4, std::uint8_t fill = 128);

/// Frames held in memory for training and evaluation.
struct FrameSet {
    int side = 64;
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    void add(const data::GrayImage& image, int label);
    data::GrayImage image(std::size_t i) const;
};

struct EncoderTrainOptions {
    int epochs = 3;
    int batch_size = 32;
    double base_rate = 1e-4;
    std::uint64_t seed = 0;
};

struct EncoderEpoch {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

using EpochCallback = std::function<void(const EncoderEpoch&)>;

std::vector<EncoderEpoch> train_encoder(EncoderModel& model, const FrameSet& train, const EncoderTrainOptions& options,
                                        const EpochCallback& on_epoch = {});

/// Per-frame argmax predictions.
std::vector<int> predict_frames(const EncoderModel& model, const FrameSet& frames);

}  // namespace dbr::enc
