#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/temporal/decoder.hpp"

namespace dbr::temporal {

struct FusionSource {
    std::string name;
    std::size_t width = 0;
    bool enabled = true;
};

/// Ordered sources concatenated per frame. Speech is a disabled placeholder.
struct FusionSpec {
    std::vector<FusionSource> sources{{"encoder", 512, true}, {"inside", 14, true}, {"outside", 4, true},
                                      {"speech", 0, false}};

    std::size_t width() const;
    FusionSpec& enable_only(std::initializer_list<std::string> names);
};

nlohmann::ordered_json to_json(const FusionSpec& spec);
FusionSpec fusion_spec_from_json(const nlohmann::json& j);

/// Per-source T x width matrices keyed by source name.
using SourceMap = std::map<std::string, nn::Tensor>;

FeatureSequence fuse_features(const SourceMap& sources, const FusionSpec& spec,
                              std::vector<double> timestamps = {});

/// Encoder features per sequence window, keyed by the hashes of the inputs
/// that produced them.
struct FeatureCache {
    std::string manifest_sha256;
    std::string encoder_sha256;
    /// Window parameters and anything else that shapes the cached rows.
    std::string settings_json;
    std::vector<std::string> ids;
    std::vector<std::uint64_t> window_starts;
    std::vector<nn::Tensor> features;

    const nn::Tensor& find(const std::string& id) const;
    std::uint64_t window_start(const std::string& id) const;
};

void save_feature_cache(const FeatureCache& cache, const std::filesystem::path& path);
/// Throws StaleArtifactError when either hash differs from the expected value.
FeatureCache load_feature_cache(const std::filesystem::path& path, const std::string& manifest_sha256,
                                const std::string& encoder_sha256);

}  // namespace dbr::temporal
