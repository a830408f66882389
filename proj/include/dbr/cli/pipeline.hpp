#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/analytics/metrics.hpp"
#include "dbr/cli/config.hpp"
#include "dbr/dataset/split.hpp"
#include "dbr/dataset/types.hpp"
#include "dbr/temporal/fusion.hpp"

namespace dbr::cli {

std::vector<std::string> task_class_names(const std::string& task);
int task_label(const data::SequenceSample& sequence, const std::string& task);

/// Stages of one experiment. Every stage reads its inputs from and writes its
/// outputs under config.output_dir; a stage whose inputs are absent raises
/// MissingArtifactError.
class Pipeline {
public:
    explicit Pipeline(ExperimentConfig config, std::ostream& log);

    const ExperimentConfig& config() const noexcept { return config_; }
    const std::filesystem::path& root() const noexcept { return config_.output_dir; }
    std::filesystem::path run_dir(int run) const;
    std::filesystem::path model_dir(int run, const std::string& task, const std::string& method) const;

    /// Echoes the resolved config to run_config.json.
    void write_config() const;

    void synth();
    void train_encoder();
    void extract();
    void train_decoder(const std::vector<std::string>& tasks, const std::vector<std::string>& methods);
    void evaluate(const std::vector<std::string>& tasks, const std::vector<std::string>& methods);
    void analyze();
    /// All stages in order.
    void run();

    const data::Dataset& dataset();
    /// Usable sequence indices of one run's split.
    data::Split split(int run);

private:
    bool uses_encoder(const std::vector<std::string>& methods) const;
    const data::WindowReport& windows();
    void train_encoder_run(int run);
    void extract_run(int run);
    temporal::FeatureCache load_cache(int run);
    void train_model(int run, const std::string& task, const std::string& method);
    analytics::MetricsReport evaluate_model(int run, const std::string& task, const std::string& method);
    void write_summary();
    void record_timing(const std::string& stage, double seconds);
    void info(const std::string& message) const;

    ExperimentConfig config_;
    std::ostream& log_;
    std::optional<data::Dataset> dataset_;
    std::optional<data::WindowReport> windows_;
    std::string manifest_sha_;
};

}  // namespace dbr::cli
