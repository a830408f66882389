#include "dbr/encoder/encoder.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "dbr/errors.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/nncore/optim.hpp"
#include "dbr/seed.hpp"

namespace dbr::enc {

using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (blocks.empty()) throw ConfigError("encoder needs at least one conv block");
    if (pool < 1) throw ConfigError("encoder pool must be >= 1");
    if (feature_width < 1 || num_classes < 2) throw ConfigError("encoder head widths must be positive, classes >= 2");
    if (conv_lr_multiplier < 0.0 || head_lr_multiplier < 0.0) throw ConfigError("lr multipliers must be >= 0");
    int side = input_side;
    for (const auto& b : blocks) {
        if (b.channels < 1 || b.kernel < 1 || b.stride < 1) throw ConfigError("conv block fields must be positive");
        side = (side + 2 * (b.kernel / 2) - b.kernel) / b.stride + 1;
        if (side < pool) throw ConfigError("input side too small for the configured conv blocks");
        side = (side - pool) / pool + 1;
    }
}

int EncoderConfig::trunk_side() const {
    int side = input_side;
    for (const auto& b : blocks) {
        side = (side + 2 * (b.kernel / 2) - b.kernel) / b.stride + 1;
        side = (side - pool) / pool + 1;
    }
    return side;
}

std::size_t EncoderConfig::trunk_width() const {
    const auto s = static_cast<std::size_t>(trunk_side());
    return static_cast<std::size_t>(blocks.back().channels) * s * s;
}

nlohmann::ordered_json to_json(const EncoderConfig& c) {
    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
    for (const auto& b : c.blocks) blocks.push_back({{"channels", b.channels}, {"kernel", b.kernel}, {"stride", b.stride}});
    return {{"input_side", c.input_side},
            {"blocks", blocks},
            {"pool", c.pool},
            {"feature_width", c.feature_width},
            {"num_classes", c.num_classes},
            {"conv_lr_multiplier", c.conv_lr_multiplier},
            {"head_lr_multiplier", c.head_lr_multiplier}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig c) {
    try {
        c.input_side = j.value("input_side", c.input_side);
        if (j.contains("blocks")) {
            c.blocks.clear();
            for (const auto& b : j.at("blocks")) {
                c.blocks.push_back({b.value("channels", 16), b.value("kernel", 3), b.value("stride", 1)});
            }
        }
        c.pool = j.value("pool", c.pool);
        c.feature_width = j.value("feature_width", c.feature_width);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.conv_lr_multiplier = j.value("conv_lr_multiplier", c.conv_lr_multiplier);
        c.head_lr_multiplier = j.value("head_lr_multiplier", c.head_lr_multiplier);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("encoder config: ") + e.what());
    }
    return c;
}

double normalize_pixel(std::uint8_t p) { return (static_cast<double>(p) - 128.0) / 128.0; }

Tensor frame_tensor(const data::GrayImage& image) {
    Tensor t({1, image.side, image.side});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = normalize_pixel(image.pixels[i]);
    return t;
}

EncoderModel::EncoderModel(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    config_.validate();
    std::mt19937_64 rng(seed);
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
        const auto& b = config_.blocks[i];
        const auto out = static_cast<std::size_t>(b.channels);
        const auto k = static_cast<std::size_t>(b.kernel);
        Tensor w({out, in_ch, k, k});
        nn::glorot_uniform(w, in_ch * k * k, out * k * k, rng);
        kernels_.emplace_back("conv" + std::to_string(i) + ".kernels", std::move(w), config_.conv_lr_multiplier);
        conv_bias_.emplace_back("conv" + std::to_string(i) + ".bias", Tensor({out}, 0.0), config_.conv_lr_multiplier);
        in_ch = out;
    }
    const auto flat = config_.trunk_width();
    const auto hidden = static_cast<std::size_t>(config_.feature_width);
    const auto classes = static_cast<std::size_t>(config_.num_classes);
    Tensor hw({hidden, flat});
    nn::glorot_uniform(hw, flat, hidden, rng);
    Tensor ow({classes, hidden});
    nn::glorot_uniform(ow, hidden, classes, rng);
    hidden_weight_ = nn::Parameter("fc_feature.weight", std::move(hw), config_.head_lr_multiplier);
    hidden_bias_ = nn::Parameter("fc_feature.bias", Tensor({hidden}, 0.0), config_.head_lr_multiplier);
    out_weight_ = nn::Parameter("fc_class.weight", std::move(ow), config_.head_lr_multiplier);
    out_bias_ = nn::Parameter("fc_class.bias", Tensor({classes}, 0.0), config_.head_lr_multiplier);
}

std::vector<nn::Parameter*> EncoderModel::parameters() {
    std::vector<nn::Parameter*> ps;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        ps.push_back(&kernels_[i]);
        ps.push_back(&conv_bias_[i]);
    }
    for (auto* p : {&hidden_weight_, &hidden_bias_, &out_weight_, &out_bias_}) ps.push_back(p);
    return ps;
}

std::vector<const nn::Parameter*> EncoderModel::parameters() const {
    auto ps = const_cast<EncoderModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

std::vector<nn::Parameter*> EncoderModel::conv_parameters() {
    std::vector<nn::Parameter*> ps;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        ps.push_back(&kernels_[i]);
        ps.push_back(&conv_bias_[i]);
    }
    return ps;
}

EncoderModel::Outputs EncoderModel::forward(nn::Graph& g, Var images) {
    const auto& shape = images.shape();
    const auto side = static_cast<std::size_t>(config_.input_side);
    if (shape.size() != 4 || shape[1] != 1 || shape[2] != side || shape[3] != side) {
        throw DimensionError("encoder expects [N x 1 x " + std::to_string(side) + " x " + std::to_string(side) +
                             "], got " + nn::shape_string(shape));
    }
    Var x = images;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        const auto& b = config_.blocks[i];
        x = nn::conv2d(x, g.param(kernels_[i]), g.param(conv_bias_[i]), b.stride, b.kernel / 2);
        x = nn::max_pool2d(nn::relu(x), config_.pool, config_.pool);
    }
    x = nn::reshape(x, {shape[0], config_.trunk_width()});
    Var features = nn::relu(nn::dense(x, g.param(hidden_weight_), g.param(hidden_bias_)));
    Var logits = nn::dense(features, g.param(out_weight_), g.param(out_bias_));
    return {features, logits};
}

EncoderModel::Activations EncoderModel::infer(const Tensor& frame) const {
    const auto side = static_cast<std::size_t>(config_.input_side);
    if (frame.shape() != nn::Shape{1, side, side}) {
        throw DimensionError("frame must be 1 x " + std::to_string(side) + " x " + std::to_string(side) + ", got " +
                             nn::shape_string(frame.shape()));
    }
    Tensor x = frame;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
        const auto& b = config_.blocks[i];
        x = nn::conv2d_forward(x, kernels_[i].value, conv_bias_[i].value, b.stride, b.kernel / 2);
        x = nn::max_pool2d_forward(nn::activation_forward(x, nn::Activation::relu), config_.pool, config_.pool);
    }
    x = x.reshaped({config_.trunk_width()});
    Activations a;
    a.features = nn::activation_forward(nn::dense_forward(x, hidden_weight_.value, hidden_bias_.value),
                                        nn::Activation::relu);
    a.logits = nn::dense_forward(a.features, out_weight_.value, out_bias_.value);
    return a;
}

nn::Checkpoint EncoderModel::to_checkpoint() const {
    nn::Checkpoint ck;
    ck.method = "encoder";
    auto cfg = to_json(config_);
    cfg["seed"] = seed_;
    ck.config_json = cfg.dump();
    for (const auto* p : parameters()) ck.tensors.push_back({p->name, p->value});
    return ck;
}

EncoderModel EncoderModel::from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.method != "encoder") throw ValidationError("checkpoint holds '" + ck.method + "', not an encoder");
    const auto j = nlohmann::json::parse(ck.config_json);
    EncoderModel m(encoder_config_from_json(j), j.value("seed", std::uint64_t{0}));
    for (auto* p : m.parameters()) {
        const auto& t = ck.get(p->name);
        if (t.shape() != p->value.shape()) throw ValidationError("encoder checkpoint shape mismatch for " + p->name);
        p->value = t;
    }
    return m;
}

std::vector<double> classify_frame(const EncoderModel& model, const data::GrayImage& frame) {
    const auto a = model.infer(frame_tensor(frame));
    return nn::softmax(a.logits.values());
}

Tensor extract_features(const EncoderModel& model, const data::GrayImage& frame) {
    return model.infer(frame_tensor(frame)).features;
}

OcclusionMap occlusion_sensitivity(const EncoderModel& model, const data::GrayImage& frame, int target_class,
                                   int patch, int stride, std::uint8_t fill) {
    const int side = static_cast<int>(frame.side);
    if (patch < 1 || stride < 1) throw DimensionError("occlusion patch and stride must be positive");
    if (patch > side) throw DimensionError("occlusion patch larger than the frame");
    if (target_class < 0 || target_class >= model.config().num_classes) {
        throw LabelError("occlusion target class out of range");
    }
    OcclusionMap map;
    map.patch = patch;
    map.stride = stride;
    map.target = target_class;
    map.rows = map.cols = static_cast<std::size_t>((side - patch) / stride + 1);
    const auto target = static_cast<std::size_t>(target_class);
    const double base = model.infer(frame_tensor(frame)).logits[target];
    for (std::size_t i = 0; i < map.rows; ++i) {
        for (std::size_t j = 0; j < map.cols; ++j) {
            data::GrayImage occluded = frame;
            for (int r = 0; r < patch; ++r) {
                for (int c = 0; c < patch; ++c) {
                    occluded.at(i * static_cast<std::size_t>(stride) + static_cast<std::size_t>(r),
                                j * static_cast<std::size_t>(stride) + static_cast<std::size_t>(c)) = fill;
                }
            }
            map.values.push_back(base - model.infer(frame_tensor(occluded)).logits[target]);
        }
    }
    return map;
}

void FrameSet::add(const data::GrayImage& image, int label) {
    if (static_cast<int>(image.side) != side) throw DimensionError("frame side differs from the frame set");
    pixels.insert(pixels.end(), image.pixels.begin(), image.pixels.end());
    labels.push_back(label);
}

data::GrayImage FrameSet::image(std::size_t i) const {
    const auto n = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
    const auto* p = pixels.data() + i * n;
    return {static_cast<std::size_t>(side), std::vector<std::uint8_t>(p, p + n)};
}

std::vector<EncoderEpoch> train_encoder(EncoderModel& model, const FrameSet& train, const EncoderTrainOptions& options,
                                        const EpochCallback& on_epoch) {
    if (train.size() == 0) throw ValidationError("encoder training set is empty");
    if (options.epochs < 1 || options.batch_size < 1) throw ConfigError("epochs and batch size must be positive");
    if (!(options.base_rate > 0.0)) throw ConfigError("encoder base rate must be positive");
    if (train.side != model.config().input_side) throw DimensionError("frame side differs from encoder input side");
    const int classes = model.config().num_classes;
    for (int l : train.labels) {
        if (l < 0 || l >= classes) throw LabelError("frame label " + std::to_string(l) + " out of range");
    }

    nn::Adam adam(model.parameters());
    const auto side = static_cast<std::size_t>(train.side);
    const auto pixels = side * side;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EncoderEpoch> log;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(options.batch_size)) {
            const auto end = std::min(order.size(), begin + static_cast<std::size_t>(options.batch_size));
            const auto n = end - begin;
            Tensor batch({n, 1, side, side});
            std::vector<int> labels(n);
            for (std::size_t b = 0; b < n; ++b) {
                const auto idx = order[begin + b];
                const auto* src = train.pixels.data() + idx * pixels;
                for (std::size_t p = 0; p < pixels; ++p) batch[b * pixels + p] = normalize_pixel(src[p]);
                labels[b] = train.labels[idx];
            }
            nn::Graph g;
            auto out = model.forward(g, g.constant(std::move(batch)));
            Var loss = nn::softmax_cross_entropy(out.logits, labels);
            g.backward(loss);
            adam.step(options.base_rate);
            loss_sum += loss.value()[0] * static_cast<double>(n);
            const auto& logits = out.logits.value();
            const auto k = static_cast<std::size_t>(classes);
            for (std::size_t b = 0; b < n; ++b) {
                const auto pred = nn::argmax(std::span<const double>(logits.data() + b * k, k));
                if (static_cast<int>(pred) == labels[b]) ++correct;
            }
        }
        EncoderEpoch e{epoch, loss_sum / static_cast<double>(train.size()),
                       static_cast<double>(correct) / static_cast<double>(train.size())};
        log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    return log;
}

std::vector<int> predict_frames(const EncoderModel& model, const FrameSet& frames) {
    std::vector<int> out;
    out.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto a = model.infer(frame_tensor(frames.image(i)));
        out.push_back(static_cast<int>(nn::argmax(a.logits.values())));
    }
    return out;
}

}  // namespace dbr::enc
