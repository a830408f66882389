#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dbr/errors.hpp"
#include "dbr/nncore/gradcheck.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/nncore/optim.hpp"
#include "dbr/nncore/serialize.hpp"

using namespace dbr;
using namespace dbr::nn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

}  // namespace

TEST(Tensor, ShapeInvariant) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_THROW(Tensor({2, 0}), DimensionError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    EXPECT_THROW(t.reshaped({4}), DimensionError);
    EXPECT_EQ(t.reshaped({3, 2}).dim(0), 3u);
}

TEST(Conv2d, OneByOneIdentity) {
    std::mt19937_64 rng(1);
    Tensor x = random_tensor({1, 5, 5}, rng);
    Tensor k({1, 1, 1, 1}, 1.0);
    Tensor b({1}, 0.0);
    EXPECT_EQ(conv2d_forward(x, k, b, 1, 0), x);
}

TEST(Conv2d, HandEvaluatedCrossCorrelation) {
    Tensor x({1, 4, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    Tensor k({1, 1, 3, 3}, std::vector<double>{1, 0, -1, 0, 1, 0, 2, 0, 0});
    Tensor b({1}, 0.5);
    // Top-left window: 1 - 3 + 6 + 2*9 = 22. The kernel sums to 3, so moving one column adds 3 and one row adds 12.
    auto expect_at = [&](std::size_t oy, std::size_t ox) {
        double s = 0.5;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) s += x[(oy + i) * 4 + ox + j] * k[i * 3 + j];
        return s;
    };
    Tensor y = conv2d_forward(x, k, b, 1, 0);
    ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
    EXPECT_DOUBLE_EQ(y[0], 22.5);
    EXPECT_DOUBLE_EQ(y[0], expect_at(0, 0));
    EXPECT_DOUBLE_EQ(y[1], 25.5);
    EXPECT_DOUBLE_EQ(y[2], 34.5);
    EXPECT_DOUBLE_EQ(y[3], 37.5);
    EXPECT_DOUBLE_EQ(y[3], expect_at(1, 1));
}

TEST(Conv2d, StrideTwoPaddingOneShape) {
    Tensor x({1, 64, 64}, 0.0);
    Tensor k({2, 1, 3, 3}, 0.1);
    Tensor b({2}, 0.0);
    EXPECT_EQ(conv2d_forward(x, k, b, 2, 1).shape(), (Shape{2, 32, 32}));
}

TEST(Conv2d, ChannelMismatchRejected) {
    Tensor x({2, 4, 4});
    Tensor k({1, 3, 3, 3});
    Tensor b({1});
    EXPECT_THROW(conv2d_forward(x, k, b, 1, 0), DimensionError);
}

TEST(MaxPool, ConstantAndInspection) {
    Tensor c({2, 4, 4}, 3.25);
    Tensor y = max_pool2d_forward(c, 2, 2);
    for (double v : y.values()) EXPECT_EQ(v, 3.25);
    Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(max_pool2d_forward(x, 2, 2)[0], 4.0);
    EXPECT_THROW(max_pool2d_forward(x, 3, 1), DimensionError);
}

TEST(MaxPool, GradientRoutesToArgmaxOnly) {
    Graph g;
    Var x = g.leaf(Tensor({1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
    g.backward(sum(max_pool2d(x, 2, 2)));
    EXPECT_EQ(g.grad(x), Tensor({1, 2, 2}, std::vector<double>{0, 0, 0, 1}));
}

TEST(MaxPool, TiesGoToFirstRowMajor) {
    Graph g;
    Var x = g.leaf(Tensor({1, 2, 2}, 7.0));
    g.backward(sum(max_pool2d(x, 2, 2)));
    EXPECT_EQ(g.grad(x), Tensor({1, 2, 2}, std::vector<double>{1, 0, 0, 0}));
}

TEST(Dense, Examples) {
    Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
    Tensor zero_b({2}, 0.0);
    Tensor x = Tensor::vector({0.3, -2.0});
    EXPECT_EQ(dense_forward(x, eye, zero_b), x);
    Tensor w({2, 2}, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(dense_forward(Tensor::vector({1, 1}), w, zero_b), Tensor::vector({3, 7}));
    Tensor b = Tensor::vector({0.25, -1});
    EXPECT_EQ(dense_forward(x, Tensor({2, 2}, 0.0), b), b);
    EXPECT_THROW(dense_forward(Tensor::vector({1, 2, 3}), w, zero_b), DimensionError);
}

TEST(Activation, Values) {
    EXPECT_EQ(activation_forward(Tensor::scalar(0), Activation::sigmoid)[0], 0.5);
    EXPECT_NEAR(activation_forward(Tensor::scalar(1), Activation::tanh)[0], 0.761594, 1e-6);
    EXPECT_EQ(activation_forward(Tensor::scalar(-3), Activation::relu)[0], 0.0);
    EXPECT_EQ(activation_forward(Tensor::scalar(2.5), Activation::relu)[0], 2.5);
    EXPECT_EQ(activation_forward(Tensor::scalar(0), Activation::tanh)[0], 0.0);
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
    std::vector<double> logits{0.7, 0.7, 0.7};
    EXPECT_NEAR(softmax_cross_entropy(logits, 1).loss, std::log(3.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, Saturated) {
    std::vector<double> logits{0.0, 50.0, 0.0, 0.0};
    EXPECT_LT(softmax_cross_entropy(logits, 1).loss, 1e-9);
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
    std::vector<double> logits{0.0, 1.0};
    EXPECT_THROW(softmax_cross_entropy(logits, 2), LabelError);
    EXPECT_THROW(softmax_cross_entropy(logits, -1), LabelError);
    std::vector<double> one{1.0};
    EXPECT_THROW(softmax_cross_entropy(one, 0), DimensionError);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        auto logits = random_tensor({5}, rng, -3, 3);
        const int label = static_cast<int>(seed % 5);
        auto ce = softmax_cross_entropy(logits.values(), label);
        const double h = 1e-5;
        for (std::size_t i = 0; i < 5; ++i) {
            auto up = logits, down = logits;
            up[i] += h;
            down[i] -= h;
            const double numeric =
                (softmax_cross_entropy(up.values(), label).loss - softmax_cross_entropy(down.values(), label).loss) /
                (2 * h);
            EXPECT_LT(relative_error(ce.grad_logits[i], numeric, 1e-8), 1e-6);
        }
    }
}

TEST(Softmax, NormalizedAndShiftInvariant) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto logits = random_tensor({6}, rng, -20, 20);
        auto p = softmax(logits.values());
        double total = 0.0;
        for (double v : p) total += v;
        EXPECT_NEAR(total, 1.0, 1e-12);
        auto shifted = logits;
        for (auto& v : shifted.values()) v += 123.0;
        auto q = softmax(shifted.values());
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
    }
}

TEST(Argmax, TiesToLowestIndex) {
    std::vector<double> v{1.0, 3.0, 3.0, 0.0};
    EXPECT_EQ(argmax(v), 1u);
}

TEST(ReversePass, SumGivesOnes) {
    Graph g;
    Var x = g.leaf(Tensor({3, 2}, 0.5));
    g.backward(sum(x));
    EXPECT_EQ(g.grad(x), Tensor({3, 2}, 1.0));
}

TEST(ReversePass, FanOutAccumulates) {
    Graph g;
    Var x = g.leaf(Tensor::scalar(4.0));
    g.backward(add(x, x));
    EXPECT_EQ(g.grad(x)[0], 2.0);
}

TEST(ReversePass, UnreachedParameterGetsZero) {
    Parameter used("used", Tensor({2}, 1.0));
    Parameter unused("unused", Tensor({3}, 1.0));
    Graph g;
    Var a = g.param(used);
    Var b = g.param(unused);
    (void)b;
    g.backward(sum(mul(a, a)));
    EXPECT_EQ(used.grad, Tensor({2}, 2.0));
    EXPECT_EQ(unused.grad, Tensor({3}, 0.0));
    EXPECT_EQ(g.grad(b), Tensor({3}, 0.0));
}

TEST(ReversePass, StateErrors) {
    Graph g;
    EXPECT_THROW(g.backward(Var{}), StateError);
    Var x = g.leaf(Tensor({2}, 1.0));
    EXPECT_THROW(g.grad(x), StateError);
    EXPECT_THROW(g.backward(x), DimensionError);
}

TEST(ReversePass, Linearity) {
    std::mt19937_64 rng(9);
    Tensor xv = random_tensor({3, 4}, rng);
    Tensor wv = random_tensor({2, 4}, rng);
    auto grad_of = [&](double a, double b) {
        Graph g;
        Var x = g.leaf(xv);
        Var w = g.constant(wv);
        Var h = linear(x, w);
        Var l1 = sum(mul(h, h));
        Var l2 = sum(tanh(h));
        g.backward(add(scale(l1, a), scale(l2, b)));
        return g.grad(x);
    };
    auto g1 = grad_of(1, 0), g2 = grad_of(0, 1), gc = grad_of(2.5, -0.75);
    for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], 2.5 * g1[i] - 0.75 * g2[i], 1e-12);
}

// Inputs are drawn away from the ReLU kink and from near-ties inside pooling windows.
TEST(Gradcheck, ElementaryOps) {
    GradcheckOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        opt.seed = seed;
        auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng),
             bias = random_tensor({5}, rng);
        EXPECT_TRUE(check_input_gradients("mul", [](Graph&, std::span<const Var> v) { return sum(mul(v[0], v[1])); },
                                          {a, b}, opt)
                        .passed);
        auto dr = check_input_gradients(
            "dense", [](Graph&, std::span<const Var> v) { return sum(tanh(dense(v[0], v[1], v[2]))); }, {a, w, bias},
            opt);
        EXPECT_TRUE(dr.passed) << dr.max_error;
        EXPECT_TRUE(check_input_gradients("sigmoid",
                                          [](Graph&, std::span<const Var> v) { return sum(mul(sigmoid(v[0]), v[1])); },
                                          {a, b}, opt)
                        .passed);
        Tensor shifted = a;
        for (auto& v : shifted.values()) v += (v >= 0 ? 0.1 : -0.1);
        EXPECT_TRUE(check_input_gradients("relu",
                                          [](Graph&, std::span<const Var> v) { return sum(mul(relu(v[0]), v[1])); },
                                          {shifted, b}, opt)
                        .passed);
        std::vector<int> labels{0, 2, 1};
        EXPECT_TRUE(check_input_gradients(
                        "softmax_ce",
                        [&](Graph&, std::span<const Var> v) { return softmax_cross_entropy(v[0], labels); }, {a}, opt)
                        .passed);
    }
}

TEST(Gradcheck, ConvAndPool) {
    GradcheckOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        opt.seed = seed;
        auto x = random_tensor({2, 2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng),
             r = random_tensor({2, 3, 3, 3}, rng);
        auto cr = check_input_gradients(
            "conv2d",
            [](Graph&, std::span<const Var> v) { return sum(mul(conv2d(v[0], v[1], v[2], 2, 1), v[3])); },
            {x, k, b, r}, opt);
        EXPECT_TRUE(cr.passed) << cr.max_error;
        // Distinct, well-separated values make the argmax stable under perturbation.
        Tensor p({1, 4, 4});
        std::vector<double> vals(16);
        for (std::size_t i = 0; i < 16; ++i) vals[i] = 0.1 * static_cast<double>(i);
        std::shuffle(vals.begin(), vals.end(), rng);
        std::copy(vals.begin(), vals.end(), p.data());
        auto pr = random_tensor({1, 2, 2}, rng);
        EXPECT_TRUE(check_input_gradients("max_pool2d",
                                          [](Graph&, std::span<const Var> v) { return sum(mul(max_pool2d(v[0], 2, 2), v[1])); },
                                          {p, pr}, opt)
                        .passed);
    }
}

TEST(Gradcheck, ShapeOps) {
    std::mt19937_64 rng(3);
    auto a = random_tensor({4, 3}, rng), b = random_tensor({4, 2}, rng), c = random_tensor({2, 3}, rng);
    auto loss = [](Graph&, std::span<const Var> v) {
        std::vector<Var> cols{v[0], v[1]};
        Var wide = concat_cols(cols);
        Var narrow = slice_cols(wide, 1, 3);
        std::vector<Var> rows{narrow, v[2]};
        Var tall = concat_rows(rows);
        Var pooled = mean_row_blocks(slice_rows(tall, 0, 6), 2);
        return sum(mul(tanh(pooled), pooled));
    };
    EXPECT_TRUE(check_input_gradients("shape_ops", loss, {a, b, c}).passed);
}

TEST(Adam, ZeroGradientLeavesParameter) {
    Parameter p("p", Tensor::vector({1.0, -2.0}));
    Adam adam({&p});
    adam.step(0.1);
    EXPECT_EQ(p.value, Tensor::vector({1.0, -2.0}));
    EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, FirstStepClosedForm) {
    Parameter p("p", Tensor::scalar(0.0));
    Adam adam({&p});
    p.grad[0] = 1.0;
    adam.step(0.1);
    EXPECT_NEAR(p.value[0], -0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(p.grad[0], 0.0);
    EXPECT_GE(adam.moments(0).v[0], 0.0);
}

TEST(Adam, FrozenParameterBitIdentical) {
    std::mt19937_64 rng(2);
    Parameter p("frozen", random_tensor({4}, rng), 0.0);
    Parameter q("live", random_tensor({4}, rng), 20.0);
    const Tensor before = p.value;
    Adam adam({&p, &q});
    for (int s = 0; s < 25; ++s) {
        p.grad = random_tensor({4}, rng);
        q.grad = random_tensor({4}, rng);
        adam.step(1e-3);
    }
    EXPECT_EQ(p.value, before);
    EXPECT_THROW(Parameter("bad", Tensor({1}), -1.0), ValidationError);
}

TEST(Adam, Deterministic) {
    auto run = [] {
        std::mt19937_64 rng(5);
        Parameter p("p", random_tensor({6}, rng));
        Adam adam({&p});
        for (int s = 0; s < 10; ++s) {
            Graph g;
            Var x = g.param(p);
            g.backward(sum(mul(tanh(x), x)));
            adam.step(0.05);
        }
        return p.value;
    };
    EXPECT_EQ(run(), run());
}

TEST(LrSchedule, DecayRule) {
    LrSchedule s;
    EXPECT_EQ(schedule_rate(s, 0), 0.1);
    EXPECT_DOUBLE_EQ(schedule_rate(s, 49), 0.1);
    EXPECT_DOUBLE_EQ(schedule_rate(s, 50), 0.05);
    EXPECT_DOUBLE_EQ(schedule_rate(s, 100), 0.025);
    LrSchedule flat{0.3, 1.0, 10};
    for (int e = 0; e < 200; e += 7) EXPECT_EQ(flat.rate(e), 0.3);
    for (int e = 1; e < 300; ++e) EXPECT_LE(s.rate(e), s.rate(e - 1));
    EXPECT_THROW(s.rate(-1), ValidationError);
    EXPECT_THROW((LrSchedule{0.1, 1.5, 50}.validate()), ConfigError);
}

TEST(Init, GlorotBoundsAndSeeded) {
    Tensor a({10, 20}), b({10, 20});
    std::mt19937_64 r1(11), r2(11);
    glorot_uniform(a, 20, 10, r1);
    glorot_uniform(b, 20, 10, r2);
    EXPECT_EQ(a, b);
    const double limit = std::sqrt(6.0 / 30.0);
    for (double v : a.values()) EXPECT_LE(std::abs(v), limit);
}

TEST(Checkpoint, ByteExactRoundTrip) {
    std::mt19937_64 rng(8);
    Checkpoint ck{"crnn", R"({"hidden":4})", {{"w", random_tensor({3, 2}, rng)}, {"b", random_tensor({2}, rng)}}};
    const auto dir = std::filesystem::temp_directory_path() / "dbr_ckpt_test";
    std::filesystem::create_directories(dir);
    save_checkpoint(ck, dir / "a.ckpt");
    auto loaded = load_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(loaded.method, "crnn");
    EXPECT_EQ(loaded.config_json, ck.config_json);
    EXPECT_EQ(loaded.get("w"), ck.tensors[0].value);
    save_checkpoint(loaded, dir / "b.ckpt");
    EXPECT_EQ(sha256_file(dir / "a.ckpt"), sha256_file(dir / "b.ckpt"));
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), MissingArtifactError);
    EXPECT_THROW(loaded.get("nope"), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST(Sha256, KnownDigest) {
    std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const unsigned char*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
