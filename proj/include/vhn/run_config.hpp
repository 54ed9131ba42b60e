#pragma once

#include <vhn/features.hpp>
#include <vhn/model.hpp>
#include <vhn/training.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vhn {

struct DatasetEntry
{
    std::filesystem::path mesh;
    /// Ground-truth vertex field file; empty for unsupervised entries.
    std::filesystem::path field;
};

///
/// Batch configuration:
///
///     {
///       "meshes": ["a.obj", {"mesh": "b.obj", "field": "b.field"}],
///       "features": {...}, "model": {...}, "train": {...},
///       "cache_dir": "cache", "out_dir": "runs/x", "seed": 7
///     }
///
/// Relative paths are resolved against the config file's directory. The
/// model's in_channels follows the feature spec unless given explicitly.
///
struct RunConfig
{
    std::vector<DatasetEntry> meshes;
    FeatureSpec features;
    VhnConfig model;
    TrainConfig train;
    std::filesystem::path cache_dir;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
};

/// Throws ValidationError on unknown keys, wrong types, inconsistent channel
/// counts, or mesh / field paths that do not exist.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Reads and parses `path` (IoError when unreadable).
RunConfig load_run_config(const std::filesystem::path& path);

/// Cache directory precedence: explicit flag, then VHN_CACHE, then the config.
std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag, const std::filesystem::path& configured);

} // namespace vhn
