#include "dbr/dataset/manifest.hpp"

#include <cmath>
#include <fstream>

#include "dbr/errors.hpp"

namespace dbr::data {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json sequence_json(const SequenceSample& s, const std::filesystem::path& root) {
    ordered_json j;
    j["id"] = s.id;
    j["intention"] = to_string(s.intention);
    j["emotion"] = to_string(s.emotion);
    j["maneuver_time"] = s.maneuver_time ? ordered_json(*s.maneuver_time) : ordered_json(nullptr);
    auto& frames = j["frames"] = ordered_json::array();
    for (const auto& f : s.frames) frames.push_back(f.lexically_relative(root).generic_string());
    j["frame_labels"] = s.frame_labels;
    j["timestamps"] = s.timestamps;
    auto& es = j["emotion_spans"] = ordered_json::array();
    for (const auto& sp : s.emotion_spans) es.push_back({sp.start, sp.end});
    auto& ms = j["mirror_check_spans"] = ordered_json::array();
    for (const auto& m : s.mirror_checks) {
        ms.push_back(ordered_json{{"start", m.start}, {"end", m.end}, {"side", to_string(m.side)}});
    }
    j["inside"] = s.inside;
    j["outside"] = s.outside;
    return j;
}

template <std::size_t N>
std::vector<std::array<double, N>> feature_rows(const json& j, const std::string& key, const std::string& id) {
    std::vector<std::array<double, N>> rows;
    if (!j.contains(key)) return rows;
    for (const auto& r : j.at(key)) {
        if (!r.is_array() || r.size() != N) {
            throw ValidationError("sequence " + id + ": every " + key + " row needs " + std::to_string(N) + " values");
        }
        std::array<double, N> row{};
        for (std::size_t i = 0; i < N; ++i) row[i] = r[i].get<double>();
        rows.push_back(row);
    }
    return rows;
}

SequenceSample parse_sequence(const json& j, const std::filesystem::path& root, double fps) {
    SequenceSample s;
    s.id = j.at("id").get<std::string>();
    try {
        s.fps = fps;
        s.intention = parse_intention(j.at("intention").get<std::string>());
        s.emotion = parse_emotion(j.at("emotion").get<std::string>());
        if (j.contains("maneuver_time") && !j.at("maneuver_time").is_null()) {
            s.maneuver_time = j.at("maneuver_time").get<double>();
        }
        for (const auto& f : j.at("frames")) s.frames.push_back(root / f.get<std::string>());
        s.frame_labels = j.at("frame_labels").get<std::vector<int>>();
        if (j.contains("timestamps")) {
            s.timestamps = j.at("timestamps").get<std::vector<double>>();
        } else {
            for (std::size_t k = 0; k < s.frame_labels.size(); ++k) s.timestamps.push_back(static_cast<double>(k) / fps);
        }
        for (const auto& sp : j.at("emotion_spans")) s.emotion_spans.push_back({sp.at(0).get<double>(), sp.at(1).get<double>()});
        for (const auto& m : j.at("mirror_check_spans")) {
            s.mirror_checks.push_back(
                {m.at("start").get<double>(), m.at("end").get<double>(), parse_direction(m.at("side").get<std::string>())});
        }
        s.inside = feature_rows<kInsideWidth>(j, "inside", s.id);
        s.outside = feature_rows<kOutsideWidth>(j, "outside", s.id);
    } catch (const json::exception& e) {
        throw ValidationError("sequence " + s.id + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("sequence " + s.id + ": " + e.what());
    }
    return s;
}

}  // namespace

void save_manifest(const Dataset& dataset, const ordered_json& extra) {
    ordered_json j;
    j["schema"] = dataset.schema;
    j["fps"] = dataset.fps;
    j["image_side"] = dataset.image_side;
    j["classes"] = dataset.classes;
    auto& seqs = j["sequences"] = ordered_json::array();
    for (const auto& s : dataset.sequences) seqs.push_back(sequence_json(s, dataset.root));
    if (extra.is_object()) {
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    }
    std::filesystem::create_directories(dataset.root);
    const auto path = dataset.root / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump() << '\n';
}

void validate_sequence(const SequenceSample& s, std::size_t num_classes, bool check_files) {
    auto fail = [&](const std::string& what) { throw ValidationError("sequence " + s.id + ": " + what); };
    const auto n = s.frame_count();
    if (s.frames.size() != n) fail("frames and frame_labels differ in length");
    if (s.timestamps.size() != n) fail("timestamps and frame_labels differ in length");
    if (!s.inside.empty() && s.inside.size() != n) fail("inside stream length differs from frame count");
    if (!s.outside.empty() && s.outside.size() != n) fail("outside stream length differs from frame count");
    for (std::size_t k = 0; k < n; ++k) {
        if (s.frame_labels[k] < 0 || static_cast<std::size_t>(s.frame_labels[k]) >= num_classes) {
            fail("frame " + std::to_string(k) + " has label " + std::to_string(s.frame_labels[k]) + " outside [0," +
                 std::to_string(num_classes) + ")");
        }
        if (k > 0) {
            const double dt = s.timestamps[k] - s.timestamps[k - 1];
            if (!(dt > 0.0)) fail("timestamps are not strictly increasing at frame " + std::to_string(k));
            if (std::abs(dt - 1.0 / s.fps) > 1e-6) fail("timestamp spacing is not 1/fps at frame " + std::to_string(k));
        }
    }
    const double duration = s.duration();
    auto check_span = [&](double a, double b, const char* what) {
        if (!(a >= 0.0 && b <= duration + 1e-9 && a < b)) fail(std::string(what) + " span outside [0, duration]");
    };
    for (const auto& sp : s.emotion_spans) check_span(sp.start, sp.end, "emotion");
    for (const auto& m : s.mirror_checks) check_span(m.start, m.end, "mirror-check");
    if ((s.emotion == Emotion::emotional) != !s.emotion_spans.empty()) {
        fail("emotion label must be emotional exactly when emotion spans exist");
    }
    if (s.intention != Intention::lk && !s.maneuver_time) fail("lane-change sequence without maneuver_time");
    if (s.maneuver_time && !(*s.maneuver_time >= 0.0 && *s.maneuver_time <= duration + 1e-9)) {
        fail("maneuver_time outside the sequence");
    }
    for (const auto& row : s.inside) {
        for (double v : row) {
            if (!std::isfinite(v)) fail("non-finite inside feature");
        }
    }
    for (const auto& row : s.outside) {
        if ((row[0] != 0.0 && row[0] != 1.0) || (row[1] != 0.0 && row[1] != 1.0)) fail("lane style must be 0 or 1");
        if (!(row[2] >= 0.0) || !std::isfinite(row[3])) fail("speed must be nonnegative and heading finite");
    }
    if (check_files) {
        for (const auto& f : s.frames) {
            if (!std::filesystem::is_regular_file(f)) fail("missing frame file " + f.string());
        }
    }
}

Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("cannot parse " + path.string() + ": " + e.what());
    }
    Dataset d;
    d.root = path.parent_path();
    try {
        d.schema = j.at("schema").get<int>();
        d.fps = j.at("fps").get<double>();
        d.image_side = j.value("image_side", 64);
        d.classes = j.at("classes").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ValidationError("manifest header: " + std::string(e.what()));
    }
    if (d.schema != kManifestSchema) throw ValidationError("unsupported manifest schema " + std::to_string(d.schema));
    if (!(d.fps > 0.0)) throw ValidationError("manifest fps must be positive");
    for (const auto& sj : j.at("sequences")) {
        auto s = parse_sequence(sj, d.root, d.fps);
        validate_sequence(s, d.classes.size(), true);
        d.sequences.push_back(std::move(s));
    }
    return d;
}

}  // namespace dbr::data
