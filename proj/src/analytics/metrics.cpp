#include "dbr/analytics/metrics.hpp"

#include <cmath>
#include <fstream>

#include "dbr/errors.hpp"

namespace dbr::analytics {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {
    if (names_.size() < 2) throw ValidationError("a confusion matrix needs at least 2 classes");
}

void ConfusionMatrix::add(int truth, int predicted) {
    const auto k = static_cast<int>(classes());
    if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
        throw LabelError("label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                         ") outside 0.." + std::to_string(k - 1));
    }
    ++at(static_cast<std::size_t>(truth), static_cast<std::size_t>(predicted));
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < classes(); ++k) s += at(k, k);
    return s;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes(); ++j) s += at(k, j);
    return s;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes(); ++i) s += at(i, k);
    return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.names_ != names_) throw ValidationError("confusion matrices have different class sets");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

ConfusionMatrix confusion_accumulate(std::vector<std::string> class_names, std::span<const LabelPair> pairs) {
    ConfusionMatrix cm(std::move(class_names));
    for (const auto& [t, p] : pairs) cm.add(t, p);
    return cm;
}

ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    ClassMetrics m{tp, tn, fp, fn};
    const auto ratio = [](std::uint64_t num, std::uint64_t den, bool& undefined) {
        undefined = den == 0;
        return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(tp, tp + fp, m.precision_undefined);
    m.recall = ratio(tp, tp + fn, m.recall_undefined);
    m.f1_undefined = m.precision + m.recall == 0.0;
    m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t k) {
    if (k >= cm.classes()) throw LabelError("class index out of range");
    const auto tp = cm.at(k, k);
    const auto fn = cm.row_total(k) - tp;
    const auto fp = cm.column_total(k) - tp;
    return class_metrics(tp, fp, fn, cm.total() - tp - fn - fp);
}

double general_average(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ValidationError("general average of an empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MetricsReport make_report(const ConfusionMatrix& cm) {
    MetricsReport r{cm, {}, general_average(cm)};
    for (std::size_t k = 0; k < cm.classes(); ++k) r.per_class.push_back(precision_recall_f1(cm, k));
    return r;
}

bool report_matches_pairs(const MetricsReport& report, std::span<const LabelPair> pairs) {
    const auto classes = report.confusion.classes();
    if (report.per_class.size() != classes || pairs.empty()) return false;
    std::uint64_t correct = 0;
    for (const auto& [t, p] : pairs) correct += t == p;
    if (static_cast<double>(correct) / static_cast<double>(pairs.size()) != report.general_average) return false;
    for (std::size_t k = 0; k < classes; ++k) {
        const int c = static_cast<int>(k);
        std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& [t, p] : pairs) {
            if (t == c && p == c) ++tp;
            else if (t != c && p == c) ++fp;
            else if (t == c && p != c) ++fn;
            else ++tn;
        }
        const auto expected = class_metrics(tp, fp, fn, tn);
        const auto& got = report.per_class[k];
        if (got.true_positive != tp || got.false_positive != fp || got.false_negative != fn ||
            got.true_negative != tn || got.precision != expected.precision || got.recall != expected.recall ||
            got.f1 != expected.f1) {
            return false;
        }
    }
    return true;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw ValidationError("mean of an empty list");
    double sum = 0.0;
    for (double v : values) sum += v;
    MeanStd r{sum / static_cast<double>(values.size()), 0.0};
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return r;
}

AggregateReport run_aggregate(std::span<const MetricsReport> reports) {
    if (reports.size() < 2) throw ValidationError("run aggregation needs at least 2 reports");
    AggregateReport a;
    a.classes = reports[0].confusion.names();
    a.runs = reports.size();
    ConfusionMatrix pooled(a.classes);
    std::vector<double> ga;
    for (const auto& r : reports) {
        if (r.confusion.names() != a.classes) throw ValidationError("reports have different class sets");
        pooled += r.confusion;
        ga.push_back(r.general_average);
    }
    for (std::size_t k = 0; k < a.classes.size(); ++k) {
        std::vector<double> pr, re, f1;
        for (const auto& r : reports) {
            pr.push_back(r.per_class[k].precision);
            re.push_back(r.per_class[k].recall);
            f1.push_back(r.per_class[k].f1);
        }
        a.precision.push_back(mean_std(pr));
        a.recall.push_back(mean_std(re));
        a.f1.push_back(mean_std(f1));
    }
    a.general_average = mean_std(ga);
    a.pooled = make_report(pooled);
    return a;
}

nlohmann::ordered_json to_json(const ClassMetrics& m) {
    return {{"true_positive", m.true_positive},   {"true_negative", m.true_negative},
            {"false_positive", m.false_positive}, {"false_negative", m.false_negative},
            {"precision", m.precision},           {"recall", m.recall},
            {"f1", m.f1},                         {"precision_undefined", m.precision_undefined},
            {"recall_undefined", m.recall_undefined}, {"f1_undefined", m.f1_undefined}};
}

namespace {

nlohmann::ordered_json matrix_json(const ConfusionMatrix& cm) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t j = 0; j < cm.classes(); ++j) row.push_back(cm.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["classes"] = r.confusion.names();
    j["total"] = r.confusion.total();
    j["general_average"] = r.general_average;
    auto per = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < r.per_class.size(); ++k) per[r.confusion.names()[k]] = to_json(r.per_class[k]);
    j["per_class"] = per;
    j["confusion"] = matrix_json(r.confusion);
    return j;
}

nlohmann::ordered_json to_json(const AggregateReport& a) {
    nlohmann::ordered_json j;
    j["runs"] = a.runs;
    j["general_average"] = mean_std_json(a.general_average);
    auto per = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < a.classes.size(); ++k) {
        per[a.classes[k]] = {{"precision", mean_std_json(a.precision[k])},
                             {"recall", mean_std_json(a.recall[k])},
                             {"f1_mean_of_runs", mean_std_json(a.f1[k])},
                             {"f1_pooled", a.pooled.per_class[k].f1}};
    }
    j["per_class"] = per;
    j["pooled"] = to_json(a.pooled);
    return j;
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "true\\predicted";
    for (const auto& n : cm.names()) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        out << cm.names()[i];
        for (std::size_t j = 0; j < cm.classes(); ++j) out << ',' << cm.at(i, j);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dbr::analytics
