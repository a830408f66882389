#include "dbr/dataset/types.hpp"

#include <fstream>
#include <sstream>

#include "dbr/errors.hpp"

namespace dbr::data {

std::string_view to_string(Intention v) {
    switch (v) {
        case Intention::lcl: return "LCL";
        case Intention::lcr: return "LCR";
        case Intention::lk: return "LK";
    }
    throw ValidationError("bad intention");
}

std::string_view to_string(Emotion v) { return v == Emotion::emotional ? "emotional" : "neutral"; }

std::string_view to_string(Direction v) {
    switch (v) {
        case Direction::normal: return "normal";
        case Direction::left: return "left";
        case Direction::right: return "right";
        case Direction::rear: return "rear";
    }
    throw ValidationError("bad direction");
}

Intention parse_intention(std::string_view s) {
    if (s == "LCL") return Intention::lcl;
    if (s == "LCR") return Intention::lcr;
    if (s == "LK") return Intention::lk;
    throw ValidationError("unknown intention '" + std::string(s) + "'");
}

Emotion parse_emotion(std::string_view s) {
    if (s == "neutral") return Emotion::neutral;
    if (s == "emotional") return Emotion::emotional;
    throw ValidationError("unknown emotion '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
    if (s == "normal") return Direction::normal;
    if (s == "left") return Direction::left;
    if (s == "right") return Direction::right;
    if (s == "rear") return Direction::rear;
    throw ValidationError("unknown mirror side '" + std::string(s) + "'");
}

std::vector<std::string> behavior_class_names(int num_classes) {
    std::vector<std::string> names{"Normal", "Left", "Right", "Rear", "E-Normal", "E-Left", "E-Right", "E-Rear"};
    if (num_classes == 7) {
        names.pop_back();
    } else if (num_classes != 8) {
        throw ConfigError("behavior classes must be 7 or 8, got " + std::to_string(num_classes));
    }
    return names;
}

int behavior_label(Direction direction, bool expressive, int num_classes) {
    const int d = static_cast<int>(direction);
    if (!expressive) return d;
    if (direction == Direction::rear && num_classes == 7) return d;
    return d + 4;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << image.side << ' ' << image.side << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {
std::size_t next_header_int(std::istream& in, const std::filesystem::path& path) {
    std::string token;
    while (in >> token) {
        if (token[0] == '#') {
            std::getline(in, token);
            continue;
        }
        try {
            return std::stoul(token);
        } catch (const std::exception&) {
            break;
        }
    }
    throw ValidationError("malformed PGM header in " + path.string());
}
}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing frame file " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ValidationError(path.string() + " is not a binary PGM");
    const auto w = next_header_int(in, path);
    const auto h = next_header_int(in, path);
    const auto maxval = next_header_int(in, path);
    if (w != h || w == 0) throw ValidationError(path.string() + ": frames must be square");
    if (maxval != 255) throw ValidationError(path.string() + ": only 8-bit PGM is supported");
    in.get();
    GrayImage img{w, std::vector<std::uint8_t>(w * h)};
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) throw ValidationError("truncated " + path.string());
    return img;
}

}  // namespace dbr::data
