#include "dbr/temporal/fusion.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "dbr/errors.hpp"

namespace dbr::temporal {

using nn::Tensor;

std::size_t FusionSpec::width() const {
    std::size_t w = 0;
    for (const auto& s : sources) {
        if (s.enabled) w += s.width;
    }
    return w;
}

FusionSpec& FusionSpec::enable_only(std::initializer_list<std::string> names) {
    for (auto& s : sources) {
        s.enabled = std::find(names.begin(), names.end(), s.name) != names.end();
    }
    return *this;
}

nlohmann::ordered_json to_json(const FusionSpec& spec) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : spec.sources) arr.push_back({{"name", s.name}, {"width", s.width}, {"enabled", s.enabled}});
    return arr;
}

FusionSpec fusion_spec_from_json(const nlohmann::json& j) {
    FusionSpec spec;
    if (!j.is_array()) throw ConfigError("fusion spec must be an array of sources");
    spec.sources.clear();
    try {
        for (const auto& s : j) {
            spec.sources.push_back({s.at("name").get<std::string>(), s.at("width").get<std::size_t>(),
                                    s.value("enabled", true)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fusion spec: ") + e.what());
    }
    return spec;
}

FeatureSequence fuse_features(const SourceMap& sources, const FusionSpec& spec, std::vector<double> timestamps) {
    std::vector<const Tensor*> parts;
    std::size_t steps = 0;
    for (const auto& s : spec.sources) {
        if (!s.enabled) continue;
        const auto it = sources.find(s.name);
        if (it == sources.end()) throw ValidationError("fusion source '" + s.name + "' is enabled but missing");
        const auto& t = it->second;
        if (t.rank() != 2 || t.dim(1) != s.width) {
            throw DimensionError("fusion source '" + s.name + "' must be T x " + std::to_string(s.width) + ", got " +
                                 nn::shape_string(t.shape()));
        }
        if (parts.empty()) {
            steps = t.dim(0);
        } else if (t.dim(0) != steps) {
            throw DimensionError("fusion source '" + s.name + "' has " + std::to_string(t.dim(0)) + " frames, expected " +
                                 std::to_string(steps));
        }
        parts.push_back(&t);
    }
    if (parts.empty()) throw ConfigError("fusion spec enables no sources");
    if (!timestamps.empty() && timestamps.size() != steps) throw DimensionError("timestamps differ from frame count");
    const auto width = spec.width();
    FeatureSequence out{Tensor({steps, width}), std::move(timestamps)};
    for (std::size_t t = 0; t < steps; ++t) {
        double* dst = out.values.data() + t * width;
        for (const auto* p : parts) {
            const auto w = p->dim(1);
            std::memcpy(dst, p->data() + t * w, w * sizeof(double));
            dst += w;
        }
    }
    return out;
}

namespace {
constexpr char kMagic[8] = {'D', 'B', 'R', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const Tensor& FeatureCache::find(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return features[i];
    }
    throw MissingArtifactError("feature cache has no entry for sequence " + id);
}

std::uint64_t FeatureCache::window_start(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return window_starts[i];
    }
    throw MissingArtifactError("feature cache has no entry for sequence " + id);
}

void save_feature_cache(const FeatureCache& cache, const std::filesystem::path& path) {
    if (cache.ids.size() != cache.features.size() || cache.ids.size() != cache.window_starts.size()) {
        throw DimensionError("feature cache columns differ in length");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    nn::BinaryWriter w(out);
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.string(cache.manifest_sha256);
    w.string(cache.encoder_sha256);
    w.string(cache.settings_json);
    w.u64(cache.ids.size());
    for (std::size_t i = 0; i < cache.ids.size(); ++i) {
        const auto& f = cache.features[i];
        w.string(cache.ids[i]);
        w.u64(cache.window_starts[i]);
        w.u64(f.dim(0));
        w.u64(f.dim(1));
        w.f64s(f.values());
    }
}

FeatureCache load_feature_cache(const std::filesystem::path& path, const std::string& manifest_sha256,
                                const std::string& encoder_sha256) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing feature cache " + path.string());
    nn::BinaryReader r(in);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path.string() + " is not a feature cache");
    if (r.u32() != kVersion) throw ValidationError("unsupported feature cache version");
    FeatureCache c;
    c.manifest_sha256 = r.string();
    c.encoder_sha256 = r.string();
    if (c.manifest_sha256 != manifest_sha256) {
        throw StaleArtifactError("feature cache " + path.string() + " was built from a different manifest");
    }
    if (c.encoder_sha256 != encoder_sha256) {
        throw StaleArtifactError("feature cache " + path.string() + " was built from a different encoder checkpoint");
    }
    c.settings_json = r.string();
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        c.ids.push_back(r.string());
        c.window_starts.push_back(r.u64());
        const auto t = r.u64();
        const auto d = r.u64();
        Tensor f({t, d});
        r.f64s(f.values());
        c.features.push_back(std::move(f));
    }
    return c;
}

}  // namespace dbr::temporal
