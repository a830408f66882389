#include "dbr/temporal/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "dbr/errors.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/seed.hpp"

namespace dbr::temporal {

using nn::Tensor;
using nn::Var;

BiLstmLayer::BiLstmLayer(std::size_t index, std::size_t input_width, std::size_t hidden, std::mt19937_64& rng) {
    const auto prefix = "layer" + std::to_string(index);
    forward_cell = LstmCellParams(prefix + ".forward", input_width, hidden, rng);
    backward_cell = LstmCellParams(prefix + ".backward", input_width, hidden, rng);
    Tensor wf({hidden, hidden});
    Tensor wb({hidden, hidden});
    nn::glorot_uniform(wf, hidden, hidden, rng);
    nn::glorot_uniform(wb, hidden, hidden, rng);
    mix_forward = nn::Parameter(prefix + ".mix_forward", std::move(wf));
    mix_backward = nn::Parameter(prefix + ".mix_backward", std::move(wb));
    mix_bias = nn::Parameter(prefix + ".mix_bias", Tensor({hidden}, 0.0));
}

std::vector<nn::Parameter*> BiLstmLayer::parameters() {
    auto ps = forward_cell.parameters();
    for (auto* p : backward_cell.parameters()) ps.push_back(p);
    for (auto* p : {&mix_forward, &mix_backward, &mix_bias}) ps.push_back(p);
    return ps;
}

namespace {

std::vector<Var> run_direction(nn::Graph& g, LstmCellParams& cell, Var inputs, std::size_t steps, std::size_t batch,
                               bool reverse) {
    const auto h = cell.hidden();
    Var projected = nn::dense(inputs, g.param(cell.input_weights), g.param(cell.bias));
    Var recurrent = g.param(cell.recurrent_weights);
    Var carry = g.constant(Tensor({batch, 2 * h}, 0.0));
    std::vector<Var> states(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto t = reverse ? steps - 1 - k : k;
        carry = lstm_cell(nn::slice_rows(projected, t * batch, batch), carry, recurrent);
        states[t] = nn::slice_cols(carry, 0, h);
    }
    return states;
}

}  // namespace

LayerStates birnn_forward(nn::Graph& g, BiLstmLayer& layer, Var inputs, std::size_t steps, std::size_t batch,
                          bool with_outputs) {
    if (steps == 0 || batch == 0) throw DimensionError("birnn_forward: empty sequence");
    const auto& shape = inputs.shape();
    if (shape.size() != 2 || shape[0] != steps * batch || shape[1] != layer.forward_cell.input_width()) {
        throw DimensionError("birnn_forward: expected [" + std::to_string(steps * batch) + " x " +
                             std::to_string(layer.forward_cell.input_width()) + "], got " + nn::shape_string(shape));
    }
    LayerStates s;
    s.forward_steps = run_direction(g, layer.forward_cell, inputs, steps, batch, false);
    s.backward_steps = run_direction(g, layer.backward_cell, inputs, steps, batch, true);
    s.forward = nn::concat_rows(s.forward_steps);
    s.backward = nn::concat_rows(s.backward_steps);
    if (with_outputs) {
        Var mixed = nn::add(nn::linear(s.forward, g.param(layer.mix_forward)),
                            nn::dense(s.backward, g.param(layer.mix_backward), g.param(layer.mix_bias)));
        s.outputs = nn::tanh(mixed);
    }
    return s;
}

Tensor InputScaler::apply(const Tensor& values) const {
    if (values.rank() != 2 || values.dim(1) != mean.size()) {
        throw DimensionError("input scaler expects width " + std::to_string(mean.size()) + ", got " +
                             nn::shape_string(values.shape()));
    }
    Tensor out = values;
    const auto width = mean.size();
    for (std::size_t t = 0; t < values.dim(0); ++t) {
        double* row = out.data() + t * width;
        for (std::size_t j = 0; j < width; ++j) row[j] = (row[j] - mean[j]) / scale[j];
    }
    return out;
}

InputScaler fit_input_scaler(std::span<const FeatureSequence> sequences) {
    if (sequences.empty()) throw ValidationError("cannot fit an input scaler on no sequences");
    const auto width = sequences[0].width();
    InputScaler s{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
    double rows = 0.0;
    for (const auto& q : sequences) {
        if (q.width() != width) throw DimensionError("sequences differ in width");
        for (std::size_t t = 0; t < q.steps(); ++t) {
            for (std::size_t j = 0; j < width; ++j) s.mean[j] += q.values[t * width + j];
        }
        rows += static_cast<double>(q.steps());
    }
    for (auto& m : s.mean) m /= rows;
    for (const auto& q : sequences) {
        for (std::size_t t = 0; t < q.steps(); ++t) {
            for (std::size_t j = 0; j < width; ++j) {
                const double e = q.values[t * width + j] - s.mean[j];
                s.scale[j] += e * e;
            }
        }
    }
    for (std::size_t j = 0; j < width; ++j) {
        const double sd = std::sqrt(s.scale[j] / rows);
        s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
    }
    return s;
}

void DecoderConfig::validate() const {
    if (input_width == 0 || hidden == 0 || layers == 0) throw ConfigError("decoder widths and layer count must be positive");
    if (num_classes < 2) throw ConfigError("decoder needs at least 2 classes");
}

nlohmann::ordered_json to_json(const DecoderConfig& c) {
    return {{"input_width", c.input_width},
            {"hidden", c.hidden},
            {"layers", c.layers},
            {"num_classes", c.num_classes},
            {"mean_pool", c.mean_pool}};
}

DecoderConfig decoder_config_from_json(const nlohmann::json& j, DecoderConfig c) {
    try {
        c.input_width = j.value("input_width", c.input_width);
        c.hidden = j.value("hidden", c.hidden);
        c.layers = j.value("layers", c.layers);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.mean_pool = j.value("mean_pool", c.mean_pool);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("decoder config: ") + e.what());
    }
    return c;
}

BiLstmDecoder::BiLstmDecoder(DecoderConfig config, std::uint64_t seed) : config_(config), seed_(seed) {
    config_.validate();
    std::mt19937_64 rng(seed);
    std::size_t width = config_.input_width;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        layers_.emplace_back(l, width, config_.hidden, rng);
        width = config_.hidden;
    }
    Tensor hw({config_.num_classes, 2 * config_.hidden});
    nn::glorot_uniform(hw, 2 * config_.hidden, config_.num_classes, rng);
    head_weight_ = nn::Parameter("head.weight", std::move(hw));
    head_bias_ = nn::Parameter("head.bias", Tensor({config_.num_classes}, 0.0));
}

void BiLstmDecoder::set_scaler(InputScaler scaler) {
    if (!scaler.empty() && (scaler.mean.size() != config_.input_width || scaler.scale.size() != config_.input_width)) {
        throw DimensionError("input scaler width differs from the decoder input width");
    }
    scaler_ = std::move(scaler);
}

std::vector<nn::Parameter*> BiLstmDecoder::parameters() {
    std::vector<nn::Parameter*> ps;
    for (auto& l : layers_) {
        for (auto* p : l.parameters()) ps.push_back(p);
    }
    ps.push_back(&head_weight_);
    ps.push_back(&head_bias_);
    return ps;
}

Var BiLstmDecoder::forward(nn::Graph& g, Var inputs, std::size_t steps, std::size_t batch) {
    Var x = inputs;
    LayerStates last;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const bool top = l + 1 == layers_.size();
        last = birnn_forward(g, layers_[l], x, steps, batch, !top);
        if (!top) x = last.outputs;
    }
    Var summary;
    if (config_.mean_pool) {
        std::vector<Var> both{last.forward, last.backward};
        summary = nn::mean_row_blocks(nn::concat_cols(both), steps);
    } else {
        std::vector<Var> ends{last.forward_steps.back(), last.backward_steps.front()};
        summary = nn::concat_cols(ends);
    }
    return nn::dense(summary, g.param(head_weight_), g.param(head_bias_));
}

std::vector<double> BiLstmDecoder::predict(const FeatureSequence& sequence) const {
    if (sequence.values.rank() != 2 || sequence.width() != config_.input_width) {
        throw DimensionError("decoder expects width " + std::to_string(config_.input_width) + ", got " +
                             nn::shape_string(sequence.values.shape()));
    }
    nn::Graph g(false);
    // Parameters are only read: the graph does not track gradients.
    auto& self = const_cast<BiLstmDecoder&>(*this);
    Var logits = self.forward(g, g.constant(normalize(sequence.values)), sequence.steps(), 1);
    return nn::softmax(logits.value().values());
}

nn::Checkpoint BiLstmDecoder::to_checkpoint(const std::string& method) const {
    nn::Checkpoint ck;
    ck.method = method;
    auto cfg = to_json(config_);
    cfg["seed"] = seed_;
    ck.config_json = cfg.dump();
    for (auto* p : const_cast<BiLstmDecoder*>(this)->parameters()) ck.tensors.push_back({p->name, p->value});
    if (!scaler_.empty()) {
        ck.tensors.push_back({"input.mean", Tensor::vector(scaler_.mean)});
        ck.tensors.push_back({"input.scale", Tensor::vector(scaler_.scale)});
    }
    return ck;
}

BiLstmDecoder BiLstmDecoder::from_checkpoint(const nn::Checkpoint& ck) {
    const auto j = nlohmann::json::parse(ck.config_json);
    BiLstmDecoder d(decoder_config_from_json(j), j.value("seed", std::uint64_t{0}));
    for (auto* p : d.parameters()) {
        const auto& t = ck.get(p->name);
        if (t.shape() != p->value.shape()) throw ValidationError("decoder checkpoint shape mismatch for " + p->name);
        p->value = t;
    }
    const bool scaled = std::any_of(ck.tensors.begin(), ck.tensors.end(),
                                    [](const nn::NamedTensor& t) { return t.name == "input.mean"; });
    if (scaled) {
        const auto& m = ck.get("input.mean");
        const auto& sc = ck.get("input.scale");
        d.set_scaler({{m.values().begin(), m.values().end()}, {sc.values().begin(), sc.values().end()}});
    }
    return d;
}

Tensor time_major_batch(std::span<const FeatureSequence* const> seqs) {
    if (seqs.empty()) throw DimensionError("empty batch");
    const auto t_len = seqs[0]->steps();
    const auto d = seqs[0]->width();
    const auto n = seqs.size();
    Tensor out({t_len * n, d});
    for (std::size_t b = 0; b < n; ++b) {
        if (seqs[b]->steps() != t_len || seqs[b]->width() != d) throw DimensionError("batch sequences differ in shape");
        const double* src = seqs[b]->values.data();
        for (std::size_t t = 0; t < t_len; ++t) {
            std::copy(src + t * d, src + (t + 1) * d, out.data() + (t * n + b) * d);
        }
    }
    return out;
}

int predicted_class(const std::vector<double>& distribution) { return static_cast<int>(nn::argmax(distribution)); }

DecoderTrainResult train_decoder(BiLstmDecoder& decoder, std::span<const FeatureSequence> sequences,
                                 std::span<const int> labels, const DecoderTrainOptions& options,
                                 const DecoderEpochCallback& on_epoch) {
    const auto& cfg = decoder.config();
    if (sequences.empty()) throw ValidationError("decoder training set is empty");
    if (sequences.size() != labels.size()) throw DimensionError("one label per training sequence required");
    if (options.epochs < 1 || options.batch_size < 1) throw ConfigError("epochs and batch size must be positive");
    options.schedule.validate();
    std::set<int> classes;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        if (sequences[i].values.rank() != 2 || sequences[i].width() != cfg.input_width) {
            throw DimensionError("training sequence " + std::to_string(i) + " has width " +
                                 nn::shape_string(sequences[i].values.shape()) + ", decoder expects " +
                                 std::to_string(cfg.input_width));
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= cfg.num_classes) {
            throw LabelError("training label " + std::to_string(labels[i]) + " out of range");
        }
        classes.insert(labels[i]);
    }
    if (classes.size() < 2) {
        throw ValidationError("training labels contain a single class (" + std::to_string(*classes.begin()) +
                              "); a classifier cannot be trained on it");
    }

    std::vector<FeatureSequence> scaled;
    if (options.standardize_inputs) {
        decoder.set_scaler(fit_input_scaler(sequences));
        for (const auto& q : sequences) scaled.push_back({decoder.normalize(q.values), q.timestamps});
    }
    const std::span<const FeatureSequence> inputs = options.standardize_inputs ? std::span<const FeatureSequence>(scaled)
                                                                                : sequences;

    std::map<std::size_t, std::vector<std::size_t>> by_length;
    for (std::size_t i = 0; i < sequences.size(); ++i) by_length[sequences[i].steps()].push_back(i);

    nn::Adam adam(decoder.parameters());
    DecoderTrainResult result;
    const auto bs = static_cast<std::size_t>(options.batch_size);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
        std::vector<std::vector<std::size_t>> batches;
        for (auto& [len, idx] : by_length) {
            auto shuffled = idx;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            for (std::size_t b = 0; b < shuffled.size(); b += bs) {
                batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(b),
                                     shuffled.begin() + static_cast<std::ptrdiff_t>(std::min(shuffled.size(), b + bs)));
            }
        }
        std::shuffle(batches.begin(), batches.end(), rng);

        const double rate = options.schedule.rate(epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : batches) {
            std::vector<const FeatureSequence*> members;
            std::vector<int> batch_labels;
            for (auto i : batch) {
                members.push_back(&inputs[i]);
                batch_labels.push_back(labels[i]);
            }
            nn::Graph g;
            Var logits = decoder.forward(g, g.constant(time_major_batch(members)), members[0]->steps(), members.size());
            Var loss = nn::softmax_cross_entropy(logits, batch_labels);
            g.backward(loss);
            adam.step(rate);
            loss_sum += loss.value()[0] * static_cast<double>(batch.size());
            const auto& lv = logits.value();
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const auto pred = nn::argmax(std::span<const double>(lv.data() + b * cfg.num_classes, cfg.num_classes));
                if (static_cast<int>(pred) == batch_labels[b]) ++correct;
            }
        }
        DecoderEpoch e{epoch, rate, loss_sum / static_cast<double>(sequences.size()),
                       static_cast<double>(correct) / static_cast<double>(sequences.size())};
        if (!std::isfinite(e.loss)) throw ValidationError("decoder loss became non-finite at epoch " + std::to_string(epoch));
        result.log.push_back(e);
        if (on_epoch) on_epoch(e);
        if (options.early_stop_loss > 0.0 && e.loss < options.early_stop_loss) break;
    }
    for (const auto& s : sequences) result.train_predictions.push_back(predicted_class(decoder.predict(s)));
    return result;
}

}  // namespace dbr::temporal
