#ifndef RPK_DTMAP_HPP
#define RPK_DTMAP_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rpk/common.hpp"
#include "rpk/signal_io.hpp"

namespace rpk {

// Per-sample distance to the nearest R-peak, saturated at cap_samples and
// normalized to [0, 1]. Valleys (zeros) coincide with peaks.
struct DistanceMap {
    std::vector<double> values;
    int64_t cap_samples = 500;  // 1 s at 500 Hz
    double fs = 500.0;
};

struct PeakExtractionConfig {
    double valley_threshold = 0.1;  // in (0, 1)
    double refractory_ms = 200.0;
};

// O(length) two-sweep distance transform. Empty peak set yields all-ones.
inline DistanceMap dt_from_peaks(const BeatAnnotations& peaks, int64_t length, int64_t cap_samples = 500,
                                 double fs = 500.0) {
    if (length <= 0) throw InputError("dt_from_peaks: length must be positive");
    if (cap_samples <= 0) throw ConfigError("dt_from_peaks: cap_samples must be positive");
    for (int64_t p : peaks)
        if (p < 0 || p >= length) throw InputError("dt_from_peaks: peak index " + std::to_string(p) + " out of range");
    std::vector<int64_t> dist(static_cast<size_t>(length), cap_samples);
    for (int64_t p : peaks) dist[static_cast<size_t>(p)] = 0;
    for (int64_t i = 1; i < length; ++i)
        dist[static_cast<size_t>(i)] = std::min(dist[static_cast<size_t>(i)], dist[static_cast<size_t>(i - 1)] + 1);
    for (int64_t i = length - 2; i >= 0; --i)
        dist[static_cast<size_t>(i)] = std::min(dist[static_cast<size_t>(i)], dist[static_cast<size_t>(i + 1)] + 1);
    DistanceMap dt;
    dt.cap_samples = cap_samples;
    dt.fs = fs;
    dt.values.resize(static_cast<size_t>(length));
    for (int64_t i = 0; i < length; ++i)
        dt.values[static_cast<size_t>(i)] =
            static_cast<double>(std::min(dist[static_cast<size_t>(i)], cap_samples)) / static_cast<double>(cap_samples);
    return dt;
}

// Valley detection: local minima below valley_threshold; a plateau minimum
// reports its midpoint; minima closer than the refractory are merged keeping
// the smaller DT value (ties -> earlier index).
inline BeatAnnotations peaks_from_dt(const DistanceMap& dt, const PeakExtractionConfig& cfg = {}) {
    if (dt.values.empty()) throw InputError("peaks_from_dt: empty distance map");
    if (!(cfg.valley_threshold > 0.0 && cfg.valley_threshold < 1.0))
        throw ConfigError("peaks_from_dt: valley_threshold must be in (0,1)");
    if (!(cfg.refractory_ms > 0.0)) throw ConfigError("peaks_from_dt: refractory must be positive");
    const auto& v = dt.values;
    int64_t n = static_cast<int64_t>(v.size());
    struct Valley {
        int64_t idx;
        double val;
    };
    std::vector<Valley> valleys;
    int64_t i = 0;
    while (i < n) {
        int64_t j = i;
        while (j + 1 < n && v[static_cast<size_t>(j + 1)] == v[static_cast<size_t>(i)]) ++j;
        bool left_ok = (i == 0) || v[static_cast<size_t>(i - 1)] > v[static_cast<size_t>(i)];
        bool right_ok = (j == n - 1) || v[static_cast<size_t>(j + 1)] > v[static_cast<size_t>(i)];
        if (left_ok && right_ok && v[static_cast<size_t>(i)] < cfg.valley_threshold)
            valleys.push_back({(i + j) / 2, v[static_cast<size_t>(i)]});
        i = j + 1;
    }
    int64_t refractory = static_cast<int64_t>(std::llround(cfg.refractory_ms * dt.fs / 1000.0));
    BeatAnnotations out;
    std::vector<Valley> kept;
    for (const auto& cand : valleys) {
        if (!kept.empty() && cand.idx - kept.back().idx < refractory) {
            if (cand.val < kept.back().val) kept.back() = cand;  // tie keeps the earlier one
        } else {
            kept.push_back(cand);
        }
    }
    out.reserve(kept.size());
    for (const auto& k : kept) out.push_back(k.idx);
    return out;
}

// Linear resample of the DT to fs_out < fs, values re-clamped to [0, 1] and
// the cap rescaled by the rate ratio.
inline DistanceMap downsample_dt(const DistanceMap& dt, double fs_out) {
    if (!(fs_out > 0)) throw ConfigError("downsample_dt: fs_out must be positive");
    if (fs_out >= dt.fs) throw ConfigError("downsample_dt: fs_out must be below the map's rate");
    DistanceMap out;
    out.values = resample_linear(dt.values, dt.fs, fs_out);
    for (double& x : out.values) x = std::min(1.0, std::max(0.0, x));
    out.cap_samples = std::max<int64_t>(
        1, static_cast<int64_t>(std::llround(static_cast<double>(dt.cap_samples) * fs_out / dt.fs)));
    out.fs = fs_out;
    return out;
}

// Round-trip harness: exact when consecutive peaks are separated by at least
// the refractory and their valleys are sub-threshold.
inline bool roundtrip_property(const BeatAnnotations& peaks, int64_t length, const PeakExtractionConfig& cfg = {},
                               int64_t cap_samples = 500, double fs = 500.0) {
    DistanceMap dt = dt_from_peaks(peaks, length, cap_samples, fs);
    return peaks_from_dt(dt, cfg) == peaks;
}

}  // namespace rpk

#endif  // RPK_DTMAP_HPP
