#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dbr::data {

enum class Intention { lcl = 0, lcr = 1, lk = 2 };
enum class Emotion { neutral = 0, emotional = 1 };
/// Where the driver is looking; Normal means straight ahead.
enum class Direction { normal = 0, left = 1, right = 2, rear = 3 };

inline constexpr std::size_t kIntentionCount = 3;
inline constexpr std::size_t kInsideWidth = 14;
inline constexpr std::size_t kOutsideWidth = 4;

std::string_view to_string(Intention v);
std::string_view to_string(Emotion v);
std::string_view to_string(Direction v);
Intention parse_intention(std::string_view s);
Emotion parse_emotion(std::string_view s);
Direction parse_direction(std::string_view s);

/// Class names for the joint (direction x expression) frame label. With 7
/// classes there is no emotional rear-check class.
std::vector<std::string> behavior_class_names(int num_classes);
int behavior_label(Direction direction, bool expressive, int num_classes);

/// Half-open [start, end) interval in seconds.
struct Span {
    double start = 0.0;
    double end = 0.0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct MirrorCheck {
    double start = 0.0;
    double end = 0.0;
    Direction side = Direction::left;
    friend bool operator==(const MirrorCheck&, const MirrorCheck&) = default;
};

/// Gaze (right eye 3, left eye 3, angle 2) then head translation (3) and rotation (3).
using InsideFeature = std::array<double, kInsideWidth>;
/// Right lane style, left lane style (1 = dashed), speed in m/s, heading in degrees.
using OutsideFeature = std::array<double, kOutsideWidth>;

struct SequenceSample {
    std::string id;
    double fps = 25.0;
    std::vector<std::filesystem::path> frames;
    std::vector<int> frame_labels;
    std::vector<double> timestamps;
    Intention intention = Intention::lk;
    Emotion emotion = Emotion::neutral;
    std::vector<Span> emotion_spans;
    std::vector<MirrorCheck> mirror_checks;
    std::optional<double> maneuver_time;
    std::vector<InsideFeature> inside;
    std::vector<OutsideFeature> outside;

    std::size_t frame_count() const noexcept { return frame_labels.size(); }
    double duration() const noexcept { return static_cast<double>(frame_count()) / fps; }
};

struct Dataset {
    int schema = 1;
    double fps = 25.0;
    int image_side = 64;
    std::vector<std::string> classes;
    std::vector<SequenceSample> sequences;
    /// Directory that frame paths are relative to.
    std::filesystem::path root;
};

/// 8-bit grayscale square image.
struct GrayImage {
    std::size_t side = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * side + col]; }
    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * side + col]; }
};

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace dbr::data
