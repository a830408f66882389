#include "dbr/baselines/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "dbr/errors.hpp"
#include "dbr/nncore/ops.hpp"
#include "dbr/seed.hpp"

namespace dbr::baselines {

namespace {

constexpr double kMinVariance = 1e-12;

}  // namespace

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != input_width) {
        throw DimensionError("standardizer expects width " + std::to_string(input_width) + ", got " +
                             std::to_string(x.size()));
    }
    std::vector<double> out(kept.size());
    for (std::size_t j = 0; j < kept.size(); ++j) out[j] = (x[kept[j]] - mean[j]) / scale[j];
    return out;
}

Standardizer fit_standardizer(std::span<const std::vector<double>> vectors, const WarningSink& warn) {
    if (vectors.empty()) throw ValidationError("cannot standardize an empty set");
    Standardizer s;
    s.input_width = vectors[0].size();
    const auto n = static_cast<double>(vectors.size());
    std::vector<std::size_t> dropped;
    for (std::size_t d = 0; d < s.input_width; ++d) {
        double sum = 0.0;
        for (const auto& v : vectors) {
            if (v.size() != s.input_width) throw DimensionError("feature vectors differ in width");
            sum += v[d];
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (const auto& v : vectors) sq += (v[d] - mean) * (v[d] - mean);
        const double var = sq / n;
        if (var <= kMinVariance * std::max(1.0, mean * mean)) {
            dropped.push_back(d);
            continue;
        }
        s.kept.push_back(d);
        s.mean.push_back(mean);
        s.scale.push_back(std::sqrt(var));
    }
    if (s.kept.empty()) throw ValidationError("every feature dimension has zero variance on the training set");
    if (!dropped.empty() && warn) {
        std::string list;
        for (auto d : dropped) list += (list.empty() ? "" : ",") + std::to_string(d);
        warn("dropping " + std::to_string(dropped.size()) + " zero-variance feature dimension(s): " + list);
    }
    return s;
}

std::vector<double> LinearSvmModel::scores(std::span<const double> raw) const {
    const auto x = standardizer.apply(raw);
    const auto width = x.size();
    std::vector<double> out(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
        double s = biases[k];
        for (std::size_t j = 0; j < width; ++j) s += weights[k * width + j] * x[j];
        out[k] = s;
    }
    return out;
}

LinearSvmModel svm_train(std::span<const std::vector<double>> vectors, std::span<const int> labels,
                         std::size_t num_classes, const SvmOptions& options, const WarningSink& warn) {
    if (vectors.size() != labels.size()) throw DimensionError("one label per feature vector required");
    if (options.epochs < 1 || !(options.rate > 0.0) || !(options.regularization > 0.0)) {
        throw ConfigError("svm epochs, rate and regularization must be positive");
    }
    std::set<int> classes;
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) throw LabelError("svm label out of range");
        classes.insert(l);
    }
    if (classes.size() < 2) throw ValidationError("svm training labels contain a single class");

    LinearSvmModel m;
    m.num_classes = num_classes;
    m.options = options;
    m.standardizer = fit_standardizer(vectors, warn);
    std::vector<std::vector<double>> xs;
    xs.reserve(vectors.size());
    for (const auto& v : vectors) xs.push_back(m.standardizer.apply(v));
    const auto width = m.standardizer.output_width();
    m.weights = nn::Tensor({num_classes, width}, 0.0);
    m.biases = nn::Tensor({num_classes}, 0.0);

    std::vector<std::size_t> order(xs.size());
    for (std::size_t k = 0; k < num_classes; ++k) {
        double* w = m.weights.data() + k * width;
        double& b = m.biases[k];
        std::uint64_t t = 0;
        for (int epoch = 0; epoch < options.epochs; ++epoch) {
            std::iota(order.begin(), order.end(), 0);
            std::mt19937_64 rng(derive_seed(derive_seed(options.seed, k), static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), rng);
            for (auto i : order) {
                ++t;
                const double step = options.rate / (1.0 + options.rate * options.regularization * static_cast<double>(t));
                const double y = labels[i] == static_cast<int>(k) ? 1.0 : -1.0;
                double margin = b;
                for (std::size_t j = 0; j < width; ++j) margin += w[j] * xs[i][j];
                margin *= y;
                const double shrink = 1.0 - step * options.regularization;
                for (std::size_t j = 0; j < width; ++j) w[j] *= shrink;
                if (margin < 1.0) {
                    for (std::size_t j = 0; j < width; ++j) w[j] += step * y * xs[i][j];
                    b += step * y;
                }
            }
        }
    }
    return m;
}

int svm_predict(const LinearSvmModel& model, std::span<const double> raw) {
    return static_cast<int>(nn::argmax(model.scores(raw)));
}

nn::Checkpoint to_checkpoint(const LinearSvmModel& m, const std::string& method) {
    nlohmann::ordered_json cfg{{"num_classes", m.num_classes},
                               {"input_width", m.standardizer.input_width},
                               {"kept", m.standardizer.kept},
                               {"epochs", m.options.epochs},
                               {"rate", m.options.rate},
                               {"regularization", m.options.regularization},
                               {"seed", m.options.seed}};
    nn::Checkpoint ck;
    ck.method = method;
    ck.config_json = cfg.dump();
    ck.tensors.push_back({"standardizer.mean", nn::Tensor::vector(m.standardizer.mean)});
    ck.tensors.push_back({"standardizer.scale", nn::Tensor::vector(m.standardizer.scale)});
    ck.tensors.push_back({"weights", m.weights});
    ck.tensors.push_back({"biases", m.biases});
    return ck;
}

LinearSvmModel svm_from_checkpoint(const nn::Checkpoint& ck) {
    LinearSvmModel m;
    try {
        const auto j = nlohmann::json::parse(ck.config_json);
        m.num_classes = j.at("num_classes").get<std::size_t>();
        m.standardizer.input_width = j.at("input_width").get<std::size_t>();
        m.standardizer.kept = j.at("kept").get<std::vector<std::size_t>>();
        m.options.epochs = j.at("epochs").get<int>();
        m.options.rate = j.at("rate").get<double>();
        m.options.regularization = j.at("regularization").get<double>();
        m.options.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("svm checkpoint config: ") + e.what());
    }
    const auto& mean = ck.get("standardizer.mean");
    const auto& scale = ck.get("standardizer.scale");
    m.standardizer.mean.assign(mean.values().begin(), mean.values().end());
    m.standardizer.scale.assign(scale.values().begin(), scale.values().end());
    m.weights = ck.get("weights");
    m.biases = ck.get("biases");
    const auto width = m.standardizer.kept.size();
    if (m.standardizer.mean.size() != width || m.standardizer.scale.size() != width ||
        m.weights.shape() != nn::Shape{m.num_classes, width} || m.biases.shape() != nn::Shape{m.num_classes}) {
        throw ValidationError("svm checkpoint tensors do not match its config");
    }
    return m;
}

}  // namespace dbr::baselines
