#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dbr/nncore/serialize.hpp"
#include "dbr/nncore/tensor.hpp"

namespace dbr::baselines {

/// Train-set standardization. Dimensions without variance are dropped.
struct Standardizer {
    std::vector<std::size_t> kept;
    std::vector<double> mean;
    std::vector<double> scale;

    std::size_t input_width = 0;
    std::size_t output_width() const noexcept { return kept.size(); }

    std::vector<double> apply(std::span<const double> x) const;
};

using WarningSink = std::function<void(const std::string&)>;

/// Fits on the rows of `vectors` (all of equal width).
Standardizer fit_standardizer(std::span<const std::vector<double>> vectors, const WarningSink& warn = {});

struct SvmOptions {
    int epochs = 50;
    /// Initial step; the step at update t is rate / (1 + rate * regularization * t).
    double rate = 0.1;
    double regularization = 1e-3;
    std::uint64_t seed = 0;
};

/// One-vs-rest linear SVM over standardized inputs.
struct LinearSvmModel {
    std::size_t num_classes = 0;
    Standardizer standardizer;
    nn::Tensor weights;  // [K x D']
    nn::Tensor biases;   // [K]
    SvmOptions options;

    std::vector<double> scores(std::span<const double> raw) const;
};

LinearSvmModel svm_train(std::span<const std::vector<double>> vectors, std::span<const int> labels,
                         std::size_t num_classes, const SvmOptions& options, const WarningSink& warn = {});

/// Argmax of the raw scores; ties go to the lowest class index.
int svm_predict(const LinearSvmModel& model, std::span<const double> raw);

nn::Checkpoint to_checkpoint(const LinearSvmModel& model, const std::string& method);
LinearSvmModel svm_from_checkpoint(const nn::Checkpoint& checkpoint);

}  // namespace dbr::baselines
