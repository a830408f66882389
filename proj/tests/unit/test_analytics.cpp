#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "dbr/analytics/intervals.hpp"
#include "dbr/analytics/metrics.hpp"
#include "dbr/errors.hpp"

using namespace dbr;
using namespace dbr::analytics;

namespace {

const std::vector<std::string> kBehaviors{"Normal", "Left", "Right", "Rear", "E-Normal", "E-Left", "E-Right", "E-Rear"};

// Printed counts of the published eight-class MobileNet confusion matrix.
ConfusionMatrix published_matrix() {
    const std::uint64_t rows[8][8] = {
        {6439, 33, 53, 10, 24, 0, 0, 0}, {30, 598, 1, 2, 0, 3, 2, 0},  {59, 0, 878, 0, 1, 0, 4, 0},
        {11, 19, 0, 48, 0, 0, 0, 1},     {140, 0, 1, 0, 830, 1, 15, 0}, {1, 6, 0, 2, 3, 63, 0, 0},
        {0, 0, 3, 0, 10, 0, 131, 0},     {0, 0, 0, 0, 0, 0, 0, 1}};
    ConfusionMatrix cm(kBehaviors);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) cm.at(i, j) = rows[i][j];
    }
    return cm;
}

std::vector<LabelPair> random_pairs(std::size_t n, int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<LabelPair> p;
    for (std::size_t i = 0; i < n; ++i) {
        const int t = d(rng);
        p.push_back({t, rng() % 3 == 0 ? d(rng) : t});
    }
    return p;
}

}  // namespace

TEST(Confusion, AccumulateBasics) {
    auto empty = confusion_accumulate({"a", "b"}, {});
    EXPECT_EQ(empty.total(), 0u);
    EXPECT_THROW(general_average(empty), ValidationError);

    std::vector<LabelPair> correct{{0, 0}, {1, 1}, {2, 2}, {1, 1}};
    auto diag = confusion_accumulate({"a", "b", "c"}, correct);
    EXPECT_EQ(diag.trace(), diag.total());
    EXPECT_EQ(general_average(diag), 1.0);

    auto pairs = random_pairs(200, 4, 1);
    auto cm = confusion_accumulate({"a", "b", "c", "d"}, pairs);
    std::reverse(pairs.begin(), pairs.end());
    std::shuffle(pairs.begin(), pairs.end(), std::mt19937_64(2));
    EXPECT_EQ(confusion_accumulate({"a", "b", "c", "d"}, pairs), cm);
    EXPECT_EQ(cm.total(), 200u);

    std::vector<LabelPair> bad{{0, 3}};
    EXPECT_THROW(confusion_accumulate({"a", "b"}, bad), LabelError);
}

TEST(Metrics, HandEvaluation) {
    auto m = class_metrics(9, 1, 3, 0);
    EXPECT_DOUBLE_EQ(m.precision, 0.9);
    EXPECT_DOUBLE_EQ(m.recall, 0.75);
    EXPECT_NEAR(m.f1, 0.8182, 1e-4);
    auto eq = class_metrics(4, 1, 1, 0);
    EXPECT_DOUBLE_EQ(eq.f1, eq.precision);

    std::vector<LabelPair> three_of_four{{0, 0}, {1, 1}, {1, 0}, {0, 0}};
    EXPECT_EQ(general_average(confusion_accumulate({"a", "b"}, three_of_four)), 0.75);
}

TEST(Metrics, DegenerateRatesAreFlaggedZeros) {
    auto m = class_metrics(0, 0, 0, 5);
    EXPECT_EQ(m.precision, 0.0);
    EXPECT_EQ(m.recall, 0.0);
    EXPECT_EQ(m.f1, 0.0);
    EXPECT_TRUE(m.precision_undefined);
    EXPECT_TRUE(m.recall_undefined);
    EXPECT_TRUE(m.f1_undefined);
    auto miss = class_metrics(0, 2, 3, 5);
    EXPECT_FALSE(miss.precision_undefined);
    EXPECT_TRUE(miss.f1_undefined);
}

TEST(Metrics, PublishedMatrix) {
    const auto cm = published_matrix();
    const auto normal = precision_recall_f1(cm, 0);
    EXPECT_EQ(normal.true_positive, 6439u);
    EXPECT_EQ(cm.row_total(0), 6559u);
    EXPECT_EQ(normal.recall, 6439.0 / 6559.0);
    EXPECT_NEAR(normal.recall, 0.982, 5e-4);
    EXPECT_NEAR(normal.precision, 0.964, 5e-4);
    EXPECT_NEAR(general_average(cm), 0.954, 5e-4);
    EXPECT_EQ(cm.total(), 9423u);
}

TEST(Metrics, WeightedRecallIdentityAndPairRecount) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pairs = random_pairs(300, 5, seed);
        const auto report = make_report(confusion_accumulate({"a", "b", "c", "d", "e"}, pairs));
        EXPECT_TRUE(report_matches_pairs(report, pairs));
        std::uint64_t weighted = 0;
        for (std::size_t k = 0; k < 5; ++k) {
            EXPECT_EQ(report.per_class[k].true_positive + report.per_class[k].false_negative,
                      report.confusion.row_total(k));
            EXPECT_EQ(report.per_class[k].true_positive + report.per_class[k].false_positive,
                      report.confusion.column_total(k));
            weighted += report.per_class[k].true_positive;
        }
        double identity = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            identity += report.per_class[k].recall * static_cast<double>(report.confusion.row_total(k));
        }
        EXPECT_NEAR(identity / 300.0, report.general_average, 1e-15);
        EXPECT_EQ(static_cast<double>(weighted) / 300.0, report.general_average);
        auto tampered = pairs;
        tampered[0].second = (tampered[0].second + 1) % 5;
        EXPECT_FALSE(report_matches_pairs(report, tampered));
    }
}

TEST(Aggregate, MeanAndSampleStd) {
    std::vector<LabelPair> a{{0, 0}, {0, 0}, {1, 1}, {1, 1}, {0, 0}, {1, 1}, {0, 0}, {1, 1}, {0, 0}, {1, 0}};
    std::vector<LabelPair> b{{0, 0}, {0, 0}, {1, 1}, {1, 0}, {0, 0}, {1, 1}, {0, 0}, {1, 1}, {0, 0}, {1, 0}};
    std::vector<MetricsReport> runs{make_report(confusion_accumulate({"x", "y"}, a)),
                                    make_report(confusion_accumulate({"x", "y"}, b))};
    auto agg = run_aggregate(runs);
    EXPECT_NEAR(agg.general_average.mean, 0.85, 1e-12);
    EXPECT_NEAR(agg.general_average.std, 0.0707, 1e-4);
    EXPECT_EQ(agg.pooled.confusion.total(), 20u);
    // Mean of per-run F1 differs from the F1 of pooled counts in general.
    EXPECT_NE(agg.f1[1].mean, agg.pooled.per_class[1].f1);

    std::vector<MetricsReport> same{runs[0], runs[0], runs[0]};
    EXPECT_EQ(run_aggregate(same).general_average.std, 0.0);
    std::vector<MetricsReport> one{runs[0]};
    EXPECT_THROW(run_aggregate(one), ValidationError);
    std::vector<MetricsReport> mixed{runs[0], make_report(confusion_accumulate({"x", "z"}, a))};
    EXPECT_THROW(run_aggregate(mixed), ValidationError);
}

TEST(Reports, JsonAndCsv) {
    const auto report = make_report(published_matrix());
    const auto j = to_json(report);
    EXPECT_EQ(j["total"], 9423);
    EXPECT_EQ(j["per_class"]["Normal"]["true_positive"], 6439);
    const auto path = std::filesystem::temp_directory_path() / "dbr_confusion_test.csv";
    write_confusion_csv(report.confusion, path);
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 9u);
    EXPECT_EQ(lines[1], "Normal,6439,33,53,10,24,0,0,0");
    std::filesystem::remove(path);
}

namespace {

data::SequenceSample sample(const std::string& id, data::Intention intent, bool emotional, double expr_start,
                            double check_start) {
    data::SequenceSample s;
    s.id = id;
    s.intention = intent;
    s.emotion = emotional ? data::Emotion::emotional : data::Emotion::neutral;
    if (emotional) s.emotion_spans.push_back({expr_start, expr_start + 2.0});
    s.mirror_checks.push_back({check_start, check_start + 0.8, data::Direction::left});
    return s;
}

}  // namespace

TEST(Intervals, SignConventionAndQualification) {
    std::vector<data::SequenceSample> seqs{sample("a", data::Intention::lcl, true, 2.0, 3.2),
                                           sample("b", data::Intention::lcr, true, 5.0, 5.0),
                                           sample("c", data::Intention::lk, true, 1.0, 4.0),
                                           sample("d", data::Intention::lcl, false, 0.0, 4.0)};
    auto stats = interval_analysis(seqs);
    ASSERT_EQ(stats.sequences.size(), 2u);
    EXPECT_NEAR(stats.sequences[0].initial, -1.2, 1e-12);
    EXPECT_EQ(stats.sequences[1].initial, 0.0);
    EXPECT_NEAR(stats.sequences[0].end, (4.0) - (4.0), 1e-12);

    std::vector<data::SequenceSample> none{sample("n", data::Intention::lk, true, 1.0, 2.0)};
    auto empty = interval_analysis(none);
    EXPECT_TRUE(empty.empty());
    EXPECT_FALSE(empty.initial.has_value());
    EXPECT_TRUE(to_json(empty)["initial_interval_s"].is_null());
}

TEST(Intervals, TranslationInvariance) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<data::SequenceSample> seqs;
    for (int i = 0; i < 10; ++i) {
        auto s = sample(std::to_string(i), data::Intention::lcr, true, u(rng), u(rng));
        s.mirror_checks.push_back({6.0 + u(rng), 7.0 + u(rng), data::Direction::right});
        seqs.push_back(s);
    }
    auto shifted = seqs;
    for (auto& s : shifted) {
        for (auto& e : s.emotion_spans) e = {e.start + 1.75, e.end + 1.75};
        for (auto& m : s.mirror_checks) m = {m.start + 1.75, m.end + 1.75, m.side};
    }
    auto a = interval_analysis(seqs), b = interval_analysis(shifted);
    for (std::size_t i = 0; i < a.sequences.size(); ++i) {
        EXPECT_NEAR(a.sequences[i].initial, b.sequences[i].initial, 1e-12);
        EXPECT_NEAR(a.sequences[i].end, b.sequences[i].end, 1e-12);
    }
}

TEST(Proportions, CountsAndFractions) {
    std::vector<data::SequenceSample> seqs;
    for (int i = 0; i < 8; ++i) seqs.push_back(sample("k", data::Intention::lk, i < 2, 0.0, 1.0));
    for (int i = 0; i < 3; ++i) seqs.push_back(sample("l", data::Intention::lcl, false, 0.0, 1.0));
    auto r = emotion_proportions(seqs);
    const auto& lk = r.by_intention[static_cast<std::size_t>(data::Intention::lk)];
    EXPECT_EQ(lk.emotional, 2u);
    EXPECT_EQ(lk.neutral, 6u);
    EXPECT_EQ(lk.emotional_fraction, 0.25);
    EXPECT_EQ(r.by_intention[0].emotional_fraction, 0.0);
    EXPECT_EQ(r.by_intention[1].emotional + r.by_intention[1].neutral, 0u);
}
