#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/baselines/hmm.hpp"
#include "dbr/baselines/svm.hpp"
#include "dbr/dataset/synth.hpp"
#include "dbr/encoder/encoder.hpp"
#include "dbr/temporal/decoder.hpp"
#include "dbr/temporal/fusion.hpp"

namespace dbr::cli {

struct EncoderStage {
    enc::EncoderConfig model;
    int epochs = 3;
    int batch_size = 32;
    double base_rate = 1e-4;
    /// Every n-th frame of a training sequence is used for encoder training.
    int frame_stride = 5;
    /// Every n-th frame of a held-out sequence is used for the frame accuracy.
    int eval_stride = 1;
};

struct DecoderStage {
    std::size_t hidden = 150;
    std::size_t layers = 2;
    bool mean_pool = false;
    int epochs = 500;
    int batch_size = 32;
    nn::LrSchedule schedule{0.001, 0.5, 50};
    double early_stop_loss = 0.02;
    bool standardize_inputs = true;
};

/// Seeds of every stage, derived from the master seed by fixed offsets.
struct StageSeeds {
    std::uint64_t master = 1;

    std::uint64_t synth() const { return master + 1; }
    std::uint64_t split(int run) const { return master + 100 + static_cast<std::uint64_t>(run); }
    std::uint64_t encoder(int run) const { return master + 200 + static_cast<std::uint64_t>(run); }
    /// Initialization and shuffling seed for one (method, task) decoder.
    std::uint64_t decoder(int run, const std::string& method, const std::string& task) const;
    std::uint64_t windows() const { return master + 400; }
    std::uint64_t svm(int run) const { return master + 500 + static_cast<std::uint64_t>(run); }
    std::uint64_t hmm(int run) const { return master + 600 + static_cast<std::uint64_t>(run); }
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "dbr_out";
    /// Existing dataset directory (with manifest.json); synthesized when empty.
    std::optional<std::filesystem::path> dataset;
    data::SynthConfig synth;
    double train_fraction = 0.8;
    int runs = 5;
    double window_s = 6.0;
    double anticipation_s = 3.5;
    EncoderStage encoder;
    DecoderStage decoder;
    temporal::FusionSpec fusion;
    std::vector<std::string> tasks{"intention", "emotion"};
    std::vector<std::string> methods{"crnn", "svm", "hmm", "hf-lstm"};
    baselines::SvmOptions svm;
    baselines::HmmFitOptions hmm;

    StageSeeds seeds() const { return {seed}; }
    /// Applies the seed policy to nested configs and checks every field.
    void finalize();
};

inline const std::vector<std::string> kTasks{"intention", "emotion"};
inline const std::vector<std::string> kMethods{"crnn", "svm", "hmm", "hf-lstm"};

/// Unknown keys and malformed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dbr::cli
