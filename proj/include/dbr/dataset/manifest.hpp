#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dbr/dataset/types.hpp"

namespace dbr::data {

inline constexpr int kManifestSchema = 1;

/// Writes `manifest.json` under dataset.root. `extra` is merged at top level.
void save_manifest(const Dataset& dataset, const nlohmann::ordered_json& extra = {});

/// Parses and validates a manifest; frame paths are resolved against its directory.
Dataset load_manifest(const std::filesystem::path& path);

/// Checks every SequenceSample invariant; throws ValidationError naming the sequence.
void validate_sequence(const SequenceSample& seq, std::size_t num_classes, bool check_files);

}  // namespace dbr::data
