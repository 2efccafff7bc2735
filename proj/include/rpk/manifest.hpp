#ifndef RPK_MANIFEST_HPP
#define RPK_MANIFEST_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "rpk/common.hpp"
#include "rpk/record_json.hpp"

namespace rpk {

// Every CLI run writes exactly one of these next to its outputs.
struct RunManifest {
    std::string command;
    nlohmann::json config;  // full flag/config snapshot
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string version = kVersion;
    double wall_clock_s = 0.0;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["version"] = m.version;
    j["wall_clock_s"] = m.wall_clock_s;
    save_json_file(path, j, 2);
}

}  // namespace rpk

#endif  // RPK_MANIFEST_HPP
