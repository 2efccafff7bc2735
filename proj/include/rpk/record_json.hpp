#ifndef RPK_RECORD_JSON_HPP
#define RPK_RECORD_JSON_HPP

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpk/signal_io.hpp"

namespace rpk {

// Canonical record exchange: {record_id, fs, lead_name, samples[], peaks[]}.
inline nlohmann::json record_to_json(const EcgRecord& rec, const BeatAnnotations& peaks) {
    nlohmann::json j;
    j["record_id"] = rec.record_id;
    j["fs"] = rec.fs;
    j["lead_name"] = rec.lead_name;
    j["samples"] = rec.samples;
    j["peaks"] = peaks;
    return j;
}

inline std::pair<EcgRecord, BeatAnnotations> record_from_json(const nlohmann::json& j) {
    EcgRecord rec;
    rec.record_id = j.at("record_id").get<std::string>();
    rec.fs = j.at("fs").get<double>();
    rec.lead_name = j.value("lead_name", std::string{});
    rec.samples = j.at("samples").get<std::vector<double>>();
    BeatAnnotations peaks;
    if (j.contains("peaks")) peaks = j.at("peaks").get<BeatAnnotations>();
    return {std::move(rec), std::move(peaks)};
}

inline nlohmann::json window_to_json(const Window& w) {
    nlohmann::json j;
    j["source_record_id"] = w.source_record_id;
    j["offset"] = w.offset;
    j["fs"] = w.fs;
    j["source_fs"] = w.source_fs;
    j["pad_samples"] = w.pad_samples;
    j["samples"] = w.samples;
    j["peaks"] = w.peak_indices;
    return j;
}

inline Window window_from_json(const nlohmann::json& j) {
    Window w;
    w.source_record_id = j.at("source_record_id").get<std::string>();
    w.offset = j.at("offset").get<int64_t>();
    w.fs = j.at("fs").get<double>();
    w.source_fs = j.value("source_fs", w.fs);
    w.pad_samples = j.value("pad_samples", int64_t{0});
    w.samples = j.at("samples").get<std::vector<double>>();
    if (j.contains("peaks")) w.peak_indices = j.at("peaks").get<BeatAnnotations>();
    return w;
}

// Windowed dataset container used by the train/detect commands.
inline nlohmann::json windows_to_json(const std::vector<Window>& windows) {
    nlohmann::json j;
    j["version"] = 1;
    j["windows"] = nlohmann::json::array();
    for (const auto& w : windows) j["windows"].push_back(window_to_json(w));
    return j;
}

inline std::vector<Window> windows_from_json(const nlohmann::json& j) {
    std::vector<Window> out;
    for (const auto& wj : j.at("windows")) out.push_back(window_from_json(wj));
    return out;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline void save_json_file(const std::string& path, const nlohmann::json& j, int indent = -1) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << j.dump(indent) << "\n";
}

}  // namespace rpk

#endif  // RPK_RECORD_JSON_HPP
