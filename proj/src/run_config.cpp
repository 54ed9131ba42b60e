#include <vhn/error.hpp>
#include <vhn/run_config.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vhn {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::filesystem::path existing(const std::filesystem::path& base, const std::string& p, const char* what)
{
    const auto path = resolve(base, p);
    if (!std::filesystem::exists(path)) throw ValidationError(std::string(what) + " '" + path.string() + "' does not exist");
    return path;
}

} // namespace

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object()) throw ValidationError("run config must be a JSON object");
    static const char* known[] = {"meshes", "features", "model", "train", "cache_dir", "out_dir", "seed"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("run config: unknown key '" + key + "'");
        }
    }
    RunConfig c;
    try {
        if (j.contains("meshes")) {
            for (const auto& m : j.at("meshes")) {
                DatasetEntry e;
                if (m.is_string()) {
                    e.mesh = existing(base_dir, m.get<std::string>(), "mesh");
                } else if (m.is_object()) {
                    for (const auto& [key, value] : m.items()) {
                        if (key != "mesh" && key != "field") throw ValidationError("run config: unknown mesh key '" + key + "'");
                    }
                    e.mesh = existing(base_dir, m.at("mesh").get<std::string>(), "mesh");
                    if (m.contains("field")) e.field = existing(base_dir, m.at("field").get<std::string>(), "field");
                } else {
                    throw ValidationError("run config: mesh entries must be strings or objects");
                }
                c.meshes.push_back(std::move(e));
            }
        }
        if (j.contains("features")) c.features = j.at("features").get<FeatureSpec>();
        c.model.in_channels = static_cast<int>(c.features.num_channels());
        if (j.contains("model")) {
            const bool explicit_in = j.at("model").contains("in_channels");
            nlohmann::json model = j.at("model");
            if (!explicit_in) model["in_channels"] = c.model.in_channels;
            c.model = model.get<VhnConfig>();
            if (c.model.in_channels != c.features.num_channels()) {
                throw ValidationError("run config: model.in_channels = " + std::to_string(c.model.in_channels) +
                                      " but the feature spec yields " + std::to_string(c.features.num_channels()));
            }
        }
        if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
        if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
        if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config '" + path.string() + "': " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag, const std::filesystem::path& configured)
{
    if (flag) return *flag;
    if (const char* env = std::getenv("VHN_CACHE"); env && *env) return env;
    return configured;
}

} // namespace vhn
