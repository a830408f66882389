#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "dbr/dataset/types.hpp"

namespace dbr::data {

struct SynthConfig {
    std::uint64_t seed = 1;
    /// Sequence counts, indexed by Intention.
    std::array<int, kIntentionCount> counts{40, 40, 40};
    std::array<double, kIntentionCount> emotional_fraction{0.15, 0.15, 0.25};
    /// Planted expression-minus-mirror-check offsets, seconds.
    double initial_interval = -1.2;
    double end_interval = -0.4;
    double noise_sigma = 20.0;
    int image_side = 64;
    double fps = 25.0;
    double duration = 10.0;
    double maneuver_time = 9.5;
    double window_length = 6.0;
    double anticipation = 3.5;
    /// Every intention sees the same glances in a class-specific order.
    bool order_only = false;
    int num_classes = 8;

    void validate() const;
};

nlohmann::ordered_json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig defaults = {});

/// Generates frames and manifest.json under `out_dir` and returns the loaded dataset.
Dataset generate_synthetic(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Glyph geometry: a 32x32 box of 4x4 cells, offset from the image centre by the jitter.
struct GlyphLayout {
    int box_side = 32;
    int cell = 8;
    int top = 16;
    int left = 16;
};

/// Renders one frame. Noise is added only when sigma > 0.
GrayImage render_frame(Direction direction, bool expressive, int side, double noise_sigma, int jitter_row,
                       int jitter_col, std::mt19937_64& rng);
GlyphLayout glyph_layout(int side, int jitter_row, int jitter_col);

}  // namespace dbr::data
