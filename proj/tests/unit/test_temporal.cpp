#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dbr/errors.hpp"
#include "dbr/nncore/gradcheck.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/temporal/decoder.hpp"
#include "dbr/temporal/fusion.hpp"

using namespace dbr;
using namespace dbr::temporal;
using nn::Tensor;
using nn::Var;

namespace {

LstmCellParams zero_cell(std::size_t d, std::size_t h) {
    std::mt19937_64 rng(0);
    LstmCellParams p("cell", d, h, rng);
    p.input_weights.value.fill(0.0);
    p.recurrent_weights.value.fill(0.0);
    p.bias.value.fill(0.0);
    return p;
}

Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

void randomize(std::vector<nn::Parameter*> params, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto* p : params) {
        for (auto& v : p->value.values()) v = d(rng);
    }
}

FeatureSequence sequence_of(Tensor values) { return FeatureSequence{std::move(values), {}}; }

}  // namespace

TEST(LstmCell, AllZeroParameters) {
    auto p = zero_cell(3, 2);
    std::vector<double> x{0.4, -1.0, 2.0}, s(2, 0.0), c(2, 0.0);
    auto r = lstm_cell_step(p, x, s, c);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(r.forget[j], 0.5);
        EXPECT_EQ(r.input[j], 0.5);
        EXPECT_EQ(r.output[j], 0.5);
        EXPECT_EQ(r.candidate[j], 0.0);
        EXPECT_EQ(r.memory[j], 0.0);
        EXPECT_EQ(r.state[j], 0.0);
    }
}

TEST(LstmCell, ScalarHandEvaluation) {
    auto p = zero_cell(1, 1);
    p.input_weights.value[3] = 1.0;  // candidate block
    p.bias.value[0] = -20.0;         // forget block
    std::vector<double> x{1.0}, s{0.0}, c{0.0};
    auto r = lstm_cell_step(p, x, s, c);
    EXPECT_NEAR(r.candidate[0], 0.76159, 1e-5);
    EXPECT_NEAR(r.memory[0], 0.38080, 1e-5);
    // 0.5 * tanh(0.38080) = 0.18170.
    EXPECT_NEAR(r.state[0], 0.5 * std::tanh(0.5 * std::tanh(1.0)), 1e-9);
    EXPECT_NEAR(r.state[0], 0.18170, 1e-5);
}

TEST(LstmCell, SaturatedGatesCarryMemory) {
    auto p = zero_cell(2, 3);
    for (std::size_t j = 0; j < 9; ++j) p.bias.value[j] = 20.0;  // forget, input, output
    std::vector<double> x{0.0, 0.0}, s(3, 0.0), c(3, 1.0);
    auto r = lstm_cell_step(p, x, s, c);
    for (double m : r.memory) EXPECT_NEAR(m, 1.0, 1e-8);
    EXPECT_THROW(lstm_cell_step(p, std::vector<double>{1.0}, s, c), DimensionError);
}

TEST(LstmCell, GateRangesAndMemoryBound) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        LstmCellParams p("cell", 4, 3, rng);
        randomize(p.parameters(), rng, 3.0);
        auto x = random_tensor({4}, rng, 2.0), s = random_tensor({3}, rng), c = random_tensor({3}, rng, 5.0);
        auto r = lstm_cell_step(p, x.values(), s.values(), c.values());
        double cmax = 0.0;
        for (double v : c.values()) cmax = std::max(cmax, std::abs(v));
        for (std::size_t j = 0; j < 3; ++j) {
            for (double g : {r.forget[j], r.input[j], r.output[j]}) {
                EXPECT_GT(g, 0.0);
                EXPECT_LT(g, 1.0);
            }
            EXPECT_LE(std::abs(r.memory[j]), std::max(cmax, 1.0) + 1.0);
        }
    }
}

TEST(LstmCell, ForgetBiasStartsAtOne) {
    std::mt19937_64 rng(0);
    LstmCellParams p("cell", 3, 4, rng);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(p.bias.value[j], j < 4 ? 1.0 : 0.0);
}

TEST(LstmCell, TapeOpMatchesReference) {
    std::mt19937_64 rng(2);
    LstmCellParams p("cell", 3, 4, rng);
    randomize(p.parameters(), rng, 1.0);
    auto x = random_tensor({2, 3}, rng), carry = random_tensor({2, 8}, rng);
    nn::Graph g;
    Var proj = nn::dense(g.constant(x), g.param(p.input_weights), g.param(p.bias));
    Var out = lstm_cell(proj, g.constant(carry), g.param(p.recurrent_weights));
    for (std::size_t n = 0; n < 2; ++n) {
        auto r = lstm_cell_step(p, std::span<const double>(x.data() + 3 * n, 3),
                                std::span<const double>(carry.data() + 8 * n, 4),
                                std::span<const double>(carry.data() + 8 * n + 4, 4));
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(out.value()[8 * n + j], r.state[j], 1e-14);
            EXPECT_NEAR(out.value()[8 * n + 4 + j], r.memory[j], 1e-14);
        }
    }
}

TEST(LstmCell, GradientMatchesFiniteDifferences) {
    nn::GradcheckOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        opt.seed = seed;
        auto proj = random_tensor({2, 12}, rng, 2.0), carry = random_tensor({2, 6}, rng),
             w = random_tensor({12, 3}, rng), probe = random_tensor({2, 6}, rng);
        auto r = nn::check_input_gradients(
            "lstm_cell",
            [](nn::Graph&, std::span<const Var> v) { return nn::sum(nn::mul(lstm_cell(v[0], v[1], v[2]), v[3])); },
            {proj, carry, w, probe}, opt);
        EXPECT_TRUE(r.passed) << r.max_error;
    }
}

// Independent unroll: two reference recurrences plus the output mix.
TEST(BiRnn, MatchesHandUnrolledReference) {
    std::mt19937_64 rng(77);
    BiLstmLayer layer(0, 1, 1, rng);
    randomize(layer.parameters(), rng, 1.0);
    const std::vector<double> xs{0.3, -0.8, 1.1};
    nn::Graph g;
    auto st = birnn_forward(g, layer, g.constant(Tensor({3, 1}, xs)), 3, 1, true);
    std::vector<double> sf(3), sb(3);
    std::vector<double> s{0.0}, c{0.0};
    for (std::size_t t = 0; t < 3; ++t) {
        auto r = lstm_cell_step(layer.forward_cell, std::span<const double>(&xs[t], 1), s, c);
        s = r.state;
        c = r.memory;
        sf[t] = s[0];
    }
    s = {0.0};
    c = {0.0};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto t = 2 - k;
        auto r = lstm_cell_step(layer.backward_cell, std::span<const double>(&xs[t], 1), s, c);
        s = r.state;
        c = r.memory;
        sb[t] = s[0];
    }
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_NEAR(st.forward.value()[t], sf[t], 1e-14);
        EXPECT_NEAR(st.backward.value()[t], sb[t], 1e-14);
        const double o = std::tanh(layer.mix_forward.value[0] * sf[t] + layer.mix_backward.value[0] * sb[t] +
                                   layer.mix_bias.value[0]);
        EXPECT_NEAR(st.outputs.value()[t], o, 1e-14);
    }
}

TEST(BiRnn, PalindromeSymmetryWithTiedParameters) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        BiLstmLayer layer(0, 3, 4, rng);
        layer.backward_cell.input_weights.value = layer.forward_cell.input_weights.value;
        layer.backward_cell.recurrent_weights.value = layer.forward_cell.recurrent_weights.value;
        layer.backward_cell.bias.value = layer.forward_cell.bias.value;
        const std::size_t steps = 1 + seed % 6;
        Tensor x({steps, 3});
        auto half = random_tensor({steps, 3}, rng);
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t j = 0; j < 3; ++j) x[t * 3 + j] = half[std::min(t, steps - 1 - t) * 3 + j];
        }
        nn::Graph g;
        auto st = birnn_forward(g, layer, g.constant(x), steps, 1, false);
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t j = 0; j < 4; ++j) {
                EXPECT_NEAR(st.forward.value()[t * 4 + j], st.backward.value()[(steps - 1 - t) * 4 + j], 1e-12);
            }
        }
    }
}

TEST(BiRnn, SingleStepAndEmptyInput) {
    std::mt19937_64 rng(1);
    BiLstmLayer layer(0, 2, 3, rng);
    nn::Graph g;
    auto st = birnn_forward(g, layer, g.constant(Tensor({1, 2}, 0.5)), 1, 1, true);
    EXPECT_EQ(st.outputs.shape(), (nn::Shape{1, 3}));
    EXPECT_TRUE(st.outputs.value().all_finite());
    EXPECT_THROW(birnn_forward(g, layer, g.constant(Tensor({1, 2}, 0.5)), 0, 1, true), DimensionError);
}

TEST(BiRnn, LayerGradientsMatchFiniteDifferences) {
    nn::GradcheckOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        opt.seed = seed;
        const std::size_t steps = 1 + seed % 5, batch = 2;
        BiLstmLayer layer(0, 3, 4, rng);
        randomize(layer.parameters(), rng, 0.8);
        const Tensor x = random_tensor({steps * batch, 3}, rng);
        const Tensor probe = random_tensor({steps * batch, 4}, rng);
        auto loss = [&](nn::Graph& g) {
            auto st = birnn_forward(g, layer, g.constant(x), steps, batch, true);
            return nn::sum(nn::mul(st.outputs, g.constant(probe)));
        };
        auto params = layer.parameters();
        auto r = nn::check_parameter_gradients("birnn", loss, params, opt);
        EXPECT_TRUE(r.passed) << r.max_error;
        auto rx = nn::check_input_gradients(
            "birnn_input",
            [&](nn::Graph& g, std::span<const Var> v) {
                return nn::sum(nn::mul(birnn_forward(g, layer, v[0], steps, batch, true).outputs, g.constant(probe)));
            },
            {x}, opt);
        EXPECT_TRUE(rx.passed) << rx.max_error;
    }
}

TEST(Decoder, FullGradientsMatchFiniteDifferences) {
    nn::GradcheckOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        DecoderConfig cfg{3, 4, 2, 3, seed % 2 == 1};
        BiLstmDecoder dec(cfg, seed);
        std::mt19937_64 rng(seed + 1000);
        randomize(dec.parameters(), rng, 0.8);
        const std::size_t steps = 2 + seed % 4, batch = 2;
        const Tensor x = random_tensor({steps * batch, 3}, rng);
        const std::vector<int> labels{static_cast<int>(seed % 3), static_cast<int>((seed + 1) % 3)};
        opt.seed = seed;
        auto params = dec.parameters();
        auto r = nn::check_parameter_gradients(
            "decoder",
            [&](nn::Graph& g) { return nn::softmax_cross_entropy(dec.forward(g, g.constant(x), steps, batch), labels); },
            params, opt);
        EXPECT_TRUE(r.passed) << r.max_error;
    }
}

TEST(Decoder, PredictIsNormalizedAndPure) {
    DecoderConfig cfg{5, 6, 2, 3, false};
    BiLstmDecoder dec(cfg, 4);
    std::mt19937_64 rng(3);
    auto seq = sequence_of(random_tensor({7, 5}, rng));
    auto p = dec.predict(seq);
    double total = 0.0;
    for (double v : p) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(p, dec.predict(seq));
    EXPECT_THROW(dec.predict(sequence_of(Tensor({7, 4}))), DimensionError);
}

TEST(Decoder, BatchedForwardMatchesSingleSequences) {
    DecoderConfig cfg{4, 5, 2, 3, false};
    BiLstmDecoder dec(cfg, 8);
    std::mt19937_64 rng(5);
    std::vector<FeatureSequence> seqs{sequence_of(random_tensor({6, 4}, rng)), sequence_of(random_tensor({6, 4}, rng))};
    std::vector<const FeatureSequence*> ptrs{&seqs[0], &seqs[1]};
    nn::Graph g;
    Var logits = dec.forward(g, g.constant(time_major_batch(ptrs)), 6, 2);
    for (std::size_t n = 0; n < 2; ++n) {
        auto p = dec.predict(seqs[n]);
        auto q = nn::softmax(std::span<const double>(logits.value().data() + 3 * n, 3));
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
    }
}

TEST(Decoder, CheckpointRoundTrip) {
    BiLstmDecoder dec({4, 3, 2, 2, true}, 9);
    auto ck = dec.to_checkpoint("crnn");
    auto back = BiLstmDecoder::from_checkpoint(ck);
    std::mt19937_64 rng(1);
    auto seq = sequence_of(random_tensor({5, 4}, rng));
    EXPECT_EQ(dec.predict(seq), back.predict(seq));
    EXPECT_TRUE(back.config().mean_pool);
}

namespace {

// Two classes separable by the sign of the first feature's running mean.
void toy_problem(std::vector<FeatureSequence>& seqs, std::vector<int>& labels, std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        Tensor x({8, 2});
        for (std::size_t t = 0; t < 8; ++t) {
            x[t * 2] = (label == 0 ? -0.5 : 0.5) + noise(rng);
            x[t * 2 + 1] = noise(rng);
        }
        seqs.push_back(sequence_of(std::move(x)));
        labels.push_back(label);
    }
}

}  // namespace

TEST(TrainDecoder, LearnsToyProblemDeterministically) {
    std::vector<FeatureSequence> seqs;
    std::vector<int> labels;
    toy_problem(seqs, labels, 1, 40);
    DecoderTrainOptions opt;
    opt.epochs = 30;
    opt.batch_size = 8;
    opt.schedule = {0.01, 0.5, 10};
    opt.seed = 2;
    auto run = [&] {
        BiLstmDecoder dec({2, 4, 1, 2, false}, 3);
        auto res = train_decoder(dec, seqs, labels, opt);
        return std::make_pair(res, dec.predict(seqs[0]));
    };
    auto [a, pa] = run();
    auto [b, pb] = run();
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        EXPECT_EQ(a.log[e].loss, b.log[e].loss);
        EXPECT_EQ(a.log[e].rate, opt.schedule.rate(static_cast<int>(e)));
        EXPECT_TRUE(std::isfinite(a.log[e].loss));
    }
    EXPECT_EQ(pa, pb);
    EXPECT_LT(a.log.back().loss, a.log.front().loss);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += a.train_predictions[i] == labels[i];
    EXPECT_GE(correct, 36u);
}

TEST(TrainDecoder, TrainingPredictionsReproducible) {
    std::vector<FeatureSequence> seqs;
    std::vector<int> labels;
    toy_problem(seqs, labels, 4, 12);
    BiLstmDecoder dec({2, 3, 1, 2, false}, 1);
    DecoderTrainOptions opt;
    opt.epochs = 3;
    opt.batch_size = 5;
    auto res = train_decoder(dec, seqs, labels, opt);
    for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_EQ(predicted_class(dec.predict(seqs[i])), res.train_predictions[i]);
}

TEST(TrainDecoder, StandardizesInputsAndPersistsScaler) {
    std::vector<FeatureSequence> seqs;
    std::vector<int> labels;
    toy_problem(seqs, labels, 6, 10);
    for (auto& q : seqs) {
        for (std::size_t t = 0; t < q.steps(); ++t) q.values[t * 2 + 1] = 30.0 + 2.0 * q.values[t * 2 + 1];
    }
    BiLstmDecoder dec({2, 3, 1, 2, false}, 1);
    DecoderTrainOptions opt;
    opt.epochs = 1;
    train_decoder(dec, seqs, labels, opt);
    ASSERT_FALSE(dec.scaler().empty());
    double mean = 0.0, sq = 0.0, n = 0.0;
    for (const auto& q : seqs) {
        const auto z = dec.normalize(q.values);
        for (std::size_t t = 0; t < q.steps(); ++t, n += 1.0) mean += z[t * 2 + 1];
    }
    mean /= n;
    for (const auto& q : seqs) {
        const auto z = dec.normalize(q.values);
        for (std::size_t t = 0; t < q.steps(); ++t) sq += (z[t * 2 + 1] - mean) * (z[t * 2 + 1] - mean);
    }
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / n), 1.0, 1e-9);
    auto back = BiLstmDecoder::from_checkpoint(dec.to_checkpoint("crnn"));
    EXPECT_EQ(back.predict(seqs[3]), dec.predict(seqs[3]));
}

TEST(TrainDecoder, RefusesSingleClassAndBadInput) {
    std::vector<FeatureSequence> seqs;
    std::vector<int> labels;
    toy_problem(seqs, labels, 4, 6);
    std::vector<int> all_neutral(labels.size(), 0);
    BiLstmDecoder dec({2, 3, 1, 2, false}, 1);
    EXPECT_THROW(train_decoder(dec, seqs, all_neutral, {}), ValidationError);
    std::vector<int> bad = labels;
    bad[0] = 5;
    EXPECT_THROW(train_decoder(dec, seqs, bad, {}), LabelError);
    BiLstmDecoder wide({3, 3, 1, 2, false}, 1);
    EXPECT_THROW(train_decoder(wide, seqs, labels, {}), DimensionError);
}

TEST(TrainDecoder, EarlyStopHonoursThreshold) {
    std::vector<FeatureSequence> seqs;
    std::vector<int> labels;
    toy_problem(seqs, labels, 9, 20);
    BiLstmDecoder dec({2, 4, 1, 2, false}, 1);
    DecoderTrainOptions opt;
    opt.epochs = 200;
    opt.batch_size = 10;
    opt.schedule = {0.02, 0.5, 50};
    opt.early_stop_loss = 0.05;
    auto res = train_decoder(dec, seqs, labels, opt);
    EXPECT_LT(res.log.size(), 200u);
    EXPECT_LT(res.log.back().loss, 0.05);
}

TEST(Fusion, WidthsAndOrder) {
    FusionSpec spec;
    EXPECT_EQ(spec.width(), 530u);
    Tensor e({2, 512}, 1.0), in({2, 14}, 2.0), out({2, 4}, 3.0);
    auto fused = fuse_features({{"encoder", e}, {"inside", in}, {"outside", out}}, spec);
    EXPECT_EQ(fused.values.shape(), (nn::Shape{2, 530}));
    EXPECT_EQ(fused.values[511], 1.0);
    EXPECT_EQ(fused.values[512], 2.0);
    EXPECT_EQ(fused.values[529], 3.0);

    FusionSpec hand;
    hand.enable_only({"inside", "outside"});
    EXPECT_EQ(hand.width(), 18u);
    FusionSpec single;
    single.enable_only({"inside"});
    EXPECT_EQ(fuse_features({{"inside", in}}, single).values, in);
}

TEST(Fusion, Errors) {
    FusionSpec spec;
    Tensor e({2, 512}), in({3, 14}), out({2, 4});
    EXPECT_THROW(fuse_features({{"encoder", e}, {"outside", out}}, spec), ValidationError);
    EXPECT_THROW(fuse_features({{"encoder", e}, {"inside", in}, {"outside", out}}, spec), DimensionError);
}

TEST(FeatureCache, RoundTripAndStaleRefusal) {
    const auto path = std::filesystem::temp_directory_path() / "dbr_cache_test.bin";
    FeatureCache c{"m1", "e1", "{}", {"a", "b"}, {0, 12}, {Tensor({2, 3}, 1.5), Tensor({4, 3}, -2.0)}};
    save_feature_cache(c, path);
    auto back = load_feature_cache(path, "m1", "e1");
    EXPECT_EQ(back.find("b"), c.features[1]);
    EXPECT_EQ(back.window_start("b"), 12u);
    EXPECT_THROW(load_feature_cache(path, "m2", "e1"), StaleArtifactError);
    EXPECT_THROW(load_feature_cache(path, "m1", "e2"), StaleArtifactError);
    EXPECT_THROW(back.find("zzz"), MissingArtifactError);
    std::filesystem::remove(path);
}
