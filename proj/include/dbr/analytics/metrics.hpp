#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace dbr::analytics {

/// Row = true class, column = predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names);

    std::size_t classes() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    void add(int truth, int predicted);
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes() + predicted]; }
    std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * classes() + predicted]; }

    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_total(std::size_t k) const;
    std::uint64_t column_total(std::size_t k) const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;
};

using LabelPair = std::pair<int, int>;  // (true, predicted)

ConfusionMatrix confusion_accumulate(std::vector<std::string> class_names, std::span<const LabelPair> pairs);

/// Counts and rates for one class. A rate whose denominator is zero is 0 and flagged.
struct ClassMetrics {
    std::uint64_t true_positive = 0;
    std::uint64_t true_negative = 0;
    std::uint64_t false_positive = 0;
    std::uint64_t false_negative = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);
ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t k);

/// trace / total; throws on an empty matrix.
double general_average(const ConfusionMatrix& cm);

struct MetricsReport {
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;
    double general_average = 0.0;
};

MetricsReport make_report(const ConfusionMatrix& cm);

/// Recounts T_p/F_p/F_N/T_N and G_Ave straight from the pair list and checks
/// that the report agrees exactly.
bool report_matches_pairs(const MetricsReport& report, std::span<const LabelPair> pairs);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (divisor n-1)
};

MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
    std::vector<std::string> classes;
    std::size_t runs = 0;
    std::vector<MeanStd> precision;
    std::vector<MeanStd> recall;
    /// Mean of the per-run F1 values.
    std::vector<MeanStd> f1;
    MeanStd general_average;
    /// Metrics of the summed confusion matrix (F1 of pooled counts).
    MetricsReport pooled;
};

AggregateReport run_aggregate(std::span<const MetricsReport> reports);

nlohmann::ordered_json to_json(const ClassMetrics& m);
nlohmann::ordered_json to_json(const MetricsReport& r);
nlohmann::ordered_json to_json(const AggregateReport& r);

/// Header row of class names, then one row of counts per true class.
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);

}  // namespace dbr::analytics
