#include "dbr/cli/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dbr/nncore/gradcheck.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/seed.hpp"
#include "dbr/temporal/decoder.hpp"

namespace dbr::cli {

using nn::GradcheckResult;
using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

void randomize(const std::vector<nn::Parameter*>& params, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto* p : params) {
        for (auto& v : p->value.values()) v = d(rng);
    }
}

void record(OpCheck& check, const GradcheckResult& r) {
    ++check.instances;
    check.passed += r.passed ? 1 : 0;
    check.entries += r.checked;
    check.max_error = std::max(check.max_error, r.max_error);
}

// Keeps every entry at least `margin` away from zero so a perturbation never
// crosses the ReLU kink.
Tensor away_from_zero(Tensor t, double margin) {
    for (auto& v : t.values()) {
        if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
    }
    return t;
}

// Distinct values 0.1 apart, so the argmax of every window is stable under the step.
Tensor separated_tensor(nn::Shape shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::vector<double> vals(t.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * static_cast<double>(i);
    std::shuffle(vals.begin(), vals.end(), rng);
    std::copy(vals.begin(), vals.end(), t.data());
    return t;
}

}  // namespace

std::vector<OpCheck> run_gradient_suite(std::size_t instances, std::uint64_t seed) {
    std::vector<OpCheck> checks{{"conv2d"}, {"max_pool2d"}, {"dense"},       {"relu"},        {"sigmoid"},
                                {"tanh"},   {"softmax_ce"}, {"lstm_cell"}, {"birnn_layer"}, {"decoder"}};
    auto find = [&](const std::string& op) -> OpCheck& {
        return *std::find_if(checks.begin(), checks.end(), [&](const OpCheck& c) { return c.op == op; });
    };
    for (std::size_t i = 0; i < instances; ++i) {
        const auto s = derive_seed(seed, i);
        std::mt19937_64 rng(s);
        nn::GradcheckOptions opt;
        opt.seed = s;

        {
            const std::size_t channels = 1 + i % 2, side = 4 + i % 3;
            auto x = random_tensor({2, channels, side, side}, rng);
            auto k = random_tensor({3, channels, 3, 3}, rng);
            auto b = random_tensor({3}, rng);
            const int stride = 1 + static_cast<int>(i % 2);
            const auto out_side = (side + 2 - 3) / static_cast<std::size_t>(stride) + 1;
            auto probe = random_tensor({2, 3, out_side, out_side}, rng);
            record(find("conv2d"), nn::check_input_gradients(
                                       "conv2d",
                                       [stride](Graph&, std::span<const Var> v) {
                                           return nn::sum(nn::mul(nn::conv2d(v[0], v[1], v[2], stride, 1), v[3]));
                                       },
                                       {x, k, b, probe}, opt));
        }
        {
            auto x = separated_tensor({2, 4, 4}, rng);
            auto probe = random_tensor({2, 2, 2}, rng);
            record(find("max_pool2d"),
                   nn::check_input_gradients(
                       "max_pool2d",
                       [](Graph&, std::span<const Var> v) { return nn::sum(nn::mul(nn::max_pool2d(v[0], 2, 2), v[1])); },
                       {x, probe}, opt));
        }
        {
            auto x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
            auto probe = random_tensor({3, 5}, rng);
            record(find("dense"), nn::check_input_gradients(
                                      "dense",
                                      [](Graph&, std::span<const Var> v) {
                                          return nn::sum(nn::mul(nn::dense(v[0], v[1], v[2]), v[3]));
                                      },
                                      {x, w, b, probe}, opt));
        }
        for (const auto& [name, kind] : {std::pair{"relu", nn::Activation::relu},
                                          std::pair{"sigmoid", nn::Activation::sigmoid},
                                          std::pair{"tanh", nn::Activation::tanh}}) {
            auto x = random_tensor({3, 4}, rng, 3.0);
            if (kind == nn::Activation::relu) x = away_from_zero(std::move(x), 0.01);
            auto probe = random_tensor({3, 4}, rng);
            record(find(name), nn::check_input_gradients(
                                   name,
                                   [kind](Graph&, std::span<const Var> v) {
                                       return nn::sum(nn::mul(nn::activation(v[0], kind), v[1]));
                                   },
                                   {x, probe}, opt));
        }
        {
            const std::size_t classes = 2 + i % 4;
            auto logits = random_tensor({4, classes}, rng, 3.0);
            std::vector<int> labels(4);
            for (auto& l : labels) l = static_cast<int>(rng() % classes);
            record(find("softmax_ce"),
                   nn::check_input_gradients(
                       "softmax_ce",
                       [labels](Graph&, std::span<const Var> v) { return nn::softmax_cross_entropy(v[0], labels); },
                       {logits}, opt));
        }
        {
            const std::size_t h = 2 + i % 3;
            auto projected = random_tensor({2, 4 * h}, rng, 2.0);
            auto carry = random_tensor({2, 2 * h}, rng);
            auto recurrent = random_tensor({4 * h, h}, rng);
            auto probe = random_tensor({2, 2 * h}, rng);
            record(find("lstm_cell"), nn::check_input_gradients(
                                          "lstm_cell",
                                          [](Graph&, std::span<const Var> v) {
                                              return nn::sum(nn::mul(temporal::lstm_cell(v[0], v[1], v[2]), v[3]));
                                          },
                                          {projected, carry, recurrent, probe}, opt));
        }
        {
            const std::size_t steps = 1 + i % 5, batch = 2, width = 3, hidden = 4;
            temporal::BiLstmLayer layer(0, width, hidden, rng);
            randomize(layer.parameters(), rng, 0.8);
            const Tensor x = random_tensor({steps * batch, width}, rng);
            const Tensor probe = random_tensor({steps * batch, hidden}, rng);
            auto params = layer.parameters();
            auto rp = nn::check_parameter_gradients(
                "birnn_layer",
                [&](Graph& g) {
                    return nn::sum(nn::mul(temporal::birnn_forward(g, layer, g.constant(x), steps, batch, true).outputs,
                                           g.constant(probe)));
                },
                params, opt);
            auto rx = nn::check_input_gradients(
                "birnn_layer",
                [&](Graph& g, std::span<const Var> v) {
                    return nn::sum(nn::mul(temporal::birnn_forward(g, layer, v[0], steps, batch, true).outputs,
                                           g.constant(probe)));
                },
                {x}, opt);
            rp.passed = rp.passed && rx.passed;
            rp.checked += rx.checked;
            rp.max_error = std::max(rp.max_error, rx.max_error);
            record(find("birnn_layer"), rp);
        }
        {
            const temporal::DecoderConfig cfg{3, 4, 2, 3, i % 2 == 1};
            temporal::BiLstmDecoder decoder(cfg, s);
            randomize(decoder.parameters(), rng, 0.8);
            const std::size_t steps = 2 + i % 4, batch = 2;
            const Tensor x = random_tensor({steps * batch, 3}, rng);
            const std::vector<int> labels{static_cast<int>(i % 3), static_cast<int>((i + 1) % 3)};
            auto params = decoder.parameters();
            record(find("decoder"), nn::check_parameter_gradients(
                                        "decoder",
                                        [&](Graph& g) {
                                            return nn::softmax_cross_entropy(
                                                decoder.forward(g, g.constant(x), steps, batch), labels);
                                        },
                                        params, opt));
        }
    }
    return checks;
}

double palindrome_max_deviation(std::size_t instances, std::uint64_t seed) {
    double worst = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        std::mt19937_64 rng(derive_seed(seed, i));
        const std::size_t width = 1 + i % 4, hidden = 2 + i % 5, steps = 1 + i % 9;
        temporal::BiLstmLayer layer(0, width, hidden, rng);
        randomize(layer.parameters(), rng, 1.0);
        layer.backward_cell.input_weights.value = layer.forward_cell.input_weights.value;
        layer.backward_cell.recurrent_weights.value = layer.forward_cell.recurrent_weights.value;
        layer.backward_cell.bias.value = layer.forward_cell.bias.value;
        const auto half = random_tensor({steps, width}, rng, 2.0);
        Tensor x({steps, width});
        for (std::size_t t = 0; t < steps; ++t) {
            const auto mirror = std::min(t, steps - 1 - t);
            std::copy(half.data() + mirror * width, half.data() + (mirror + 1) * width, x.data() + t * width);
        }
        Graph g(false);
        const auto states = temporal::birnn_forward(g, layer, g.constant(x), steps, 1, false);
        const auto& fwd = states.forward.value();
        const auto& bwd = states.backward.value();
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t j = 0; j < hidden; ++j) {
                worst = std::max(worst, std::abs(fwd[t * hidden + j] - bwd[(steps - 1 - t) * hidden + j]));
            }
        }
    }
    return worst;
}

}  // namespace dbr::cli
