#ifndef RPK_SIGNAL_IO_HPP
#define RPK_SIGNAL_IO_HPP

#include <cctype>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpk/common.hpp"

namespace rpk {

struct EcgRecord {
    std::string record_id;
    std::vector<double> samples;  // mV
    double fs = 0.0;              // Hz
    std::string lead_name;
};

// Strictly increasing beat sample indices, in the owning record's sample units.
using BeatAnnotations = std::vector<int64_t>;

struct SignalMeta {
    std::string file_name;
    int format = 212;      // 212 or 16
    double gain = 200.0;   // ADC units per mV (0 in a header means the default)
    int baseline = 0;      // ADC units
    std::string units;
    std::string description;
};

struct RecordMeta {
    std::string record_name;
    int n_signals = 0;
    double fs = 0.0;
    int64_t n_samples = 0;
    std::vector<SignalMeta> signals;
};

struct Window {
    std::vector<double> samples;  // length L, zero-padded when pad_samples > 0
    std::string source_record_id;
    int64_t offset = 0;           // start sample in the source record
    double fs = 0.0;
    double source_fs = 0.0;       // rate of the un-resampled source (== fs if none)
    BeatAnnotations peak_indices; // window-local
    int64_t pad_samples = 0;
};

namespace detail {

inline std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline bool parse_i64(const std::string& s, int64_t& out) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (size_t j = i; j < s.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
    out = std::stoll(s);
    return true;
}

}  // namespace detail

// Header text: first line `name n_signals fs n_samples`, then one line per
// signal: `file format gain[(baseline)][/units] [extras...]`. '#' lines and
// unknown trailing fields are ignored. WFDB-isms tolerated: record name and fs
// may carry '/'-suffixes, gain 0 means the 200 adu/mV default.
inline RecordMeta parse_header(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    RecordMeta meta;
    bool have_first = false;
    while (std::getline(in, line)) {
        line = detail::strip(line);
        if (line.empty() || line[0] == '#') continue;
        auto tok = detail::split_ws(line);
        if (!have_first) {
            if (tok.size() < 4) throw ParseError("header: first line needs `name n_signals fs n_samples`");
            meta.record_name = tok[0].substr(0, tok[0].find('/'));
            int64_t nsig = 0, nsamp = 0;
            if (!detail::parse_i64(tok[1], nsig) || nsig < 1)
                throw ParseError("header: bad signal count `" + tok[1] + "`");
            std::string fs_tok = tok[2].substr(0, tok[2].find('/'));
            try {
                meta.fs = std::stod(fs_tok);
            } catch (...) {
                throw ParseError("header: bad sampling rate `" + tok[2] + "`");
            }
            if (!(meta.fs > 0)) throw ParseError("header: sampling rate must be positive");
            if (!detail::parse_i64(tok[3], nsamp) || nsamp < 0)
                throw ParseError("header: bad sample count `" + tok[3] + "`");
            meta.n_signals = static_cast<int>(nsig);
            meta.n_samples = nsamp;
            have_first = true;
            continue;
        }
        if (static_cast<int>(meta.signals.size()) == meta.n_signals) break;
        if (tok.size() < 2) throw ParseError("header: signal line needs `file format ...`");
        SignalMeta sig;
        sig.file_name = tok[0];
        std::string fmt = tok[1];
        // format may carry xN/:S/+O modifiers; the leading integer is the code
        size_t fi = 0;
        while (fi < fmt.size() && std::isdigit(static_cast<unsigned char>(fmt[fi]))) ++fi;
        int64_t code = 0;
        if (fi == 0 || !detail::parse_i64(fmt.substr(0, fi), code))
            throw ParseError("header: bad format field `" + fmt + "`");
        if (code != 212 && code != 16)
            throw UnsupportedFormat("header: unsupported signal format " + std::to_string(code));
        sig.format = static_cast<int>(code);
        if (tok.size() >= 3) {
            // gain token: `gain`, `gain(baseline)`, `gain/units`, or combinations
            std::string g = tok[2];
            std::string units, base;
            if (auto sl = g.find('/'); sl != std::string::npos) {
                units = g.substr(sl + 1);
                g = g.substr(0, sl);
            }
            if (auto lp = g.find('('); lp != std::string::npos) {
                auto rp = g.find(')', lp);
                if (rp == std::string::npos) throw ParseError("header: unbalanced baseline in `" + tok[2] + "`");
                base = g.substr(lp + 1, rp - lp - 1);
                g = g.substr(0, lp);
            }
            try {
                if (!g.empty()) sig.gain = std::stod(g);
            } catch (...) {
                throw ParseError("header: bad gain `" + tok[2] + "`");
            }
            if (sig.gain == 0.0) sig.gain = 200.0;
            if (!base.empty()) {
                int64_t b = 0;
                if (!detail::parse_i64(base, b)) throw ParseError("header: bad baseline `" + base + "`");
                sig.baseline = static_cast<int>(b);
            }
            sig.units = units;
        }
        if (tok.size() >= 4 && sig.baseline == 0) {
            // plain `gain baseline` layout (no parentheses)
            int64_t b = 0;
            if (detail::parse_i64(tok[3], b)) sig.baseline = static_cast<int>(b);
        }
        meta.signals.push_back(std::move(sig));
    }
    if (!have_first) throw ParseError("header: empty input");
    if (static_cast<int>(meta.signals.size()) < meta.n_signals)
        throw ParseError("header: expected " + std::to_string(meta.n_signals) + " signal lines, got " +
                         std::to_string(meta.signals.size()));
    return meta;
}

// Format 212: two 12-bit two's-complement samples packed into 3 bytes.
// sample A = byte0 | (low nibble of byte1) << 8
// sample B = byte2 | (high nibble of byte1) << 8
inline std::vector<int> decode_fmt212(const std::vector<uint8_t>& bytes, int64_t n_samples_total) {
    if (n_samples_total < 0) throw InputError("decode_fmt212: negative sample count");
    int64_t need = (n_samples_total * 3 + 1) / 2;  // ceil(n * 1.5)
    if (static_cast<int64_t>(bytes.size()) < need)
        throw ParseError("decode_fmt212: buffer truncated (" + std::to_string(bytes.size()) + " bytes for " +
                         std::to_string(n_samples_total) + " samples)");
    std::vector<int> out(static_cast<size_t>(n_samples_total));
    int64_t bi = 0;
    for (int64_t i = 0; i < n_samples_total; i += 2) {
        int a = bytes[bi] | ((bytes[bi + 1] & 0x0F) << 8);
        if (a & 0x800) a -= 0x1000;
        out[static_cast<size_t>(i)] = a;
        if (i + 1 < n_samples_total) {
            int b = bytes[bi + 2] | ((bytes[bi + 1] & 0xF0) << 4);
            if (b & 0x800) b -= 0x1000;
            out[static_cast<size_t>(i + 1)] = b;
        }
        bi += 3;
    }
    return out;
}

struct Fmt212Encoding {
    std::vector<uint8_t> bytes;
    bool padded = false;  // true when a zero sample was appended to even the count
};

inline Fmt212Encoding encode_fmt212(const std::vector<int>& values) {
    for (int v : values)
        if (v < -2048 || v > 2047)
            throw RangeError("encode_fmt212: value " + std::to_string(v) + " outside 12-bit range");
    Fmt212Encoding enc;
    std::vector<int> vals = values;
    if (vals.size() % 2 != 0) {
        vals.push_back(0);
        enc.padded = true;
    }
    enc.bytes.reserve(vals.size() / 2 * 3);
    for (size_t i = 0; i < vals.size(); i += 2) {
        unsigned a = static_cast<unsigned>(vals[i]) & 0xFFF;
        unsigned b = static_cast<unsigned>(vals[i + 1]) & 0xFFF;
        enc.bytes.push_back(static_cast<uint8_t>(a & 0xFF));
        enc.bytes.push_back(static_cast<uint8_t>(((b >> 8) & 0x0F) << 4 | ((a >> 8) & 0x0F)));
        enc.bytes.push_back(static_cast<uint8_t>(b & 0xFF));
    }
    return enc;
}

// Format 16: 16-bit little-endian two's complement.
inline std::vector<int> decode_fmt16(const std::vector<uint8_t>& bytes, int64_t n_samples_total) {
    if (static_cast<int64_t>(bytes.size()) < n_samples_total * 2)
        throw ParseError("decode_fmt16: buffer truncated");
    std::vector<int> out(static_cast<size_t>(n_samples_total));
    for (int64_t i = 0; i < n_samples_total; ++i) {
        int v = bytes[2 * i] | (bytes[2 * i + 1] << 8);
        if (v & 0x8000) v -= 0x10000;
        out[static_cast<size_t>(i)] = v;
    }
    return out;
}

inline std::vector<double> adc_to_mv(const std::vector<int>& raw, double gain, int baseline) {
    if (gain == 0.0) throw ConfigError("adc_to_mv: gain must be nonzero");
    std::vector<double> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - baseline) / gain;
    return out;
}

// MIT-BIH beat label codes; everything else is treated as non-beat.
inline const std::set<std::string>& default_beat_labels() {
    static const std::set<std::string> labels = {"N", "L", "R", "B", "A", "a", "J", "S", "V", "r",
                                                 "F", "e", "j", "n", "E", "/", "f", "Q", "?"};
    return labels;
}

// Annotation CSV: `sample_index,label` per line, '#' comments ignored. Returns
// sorted, deduplicated beat indices; lines whose label is not in beat_labels
// are dropped.
inline BeatAnnotations parse_annotation_csv(const std::string& text,
                                            const std::set<std::string>& beat_labels = default_beat_labels()) {
    std::istringstream in(text);
    std::string line;
    BeatAnnotations ann;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip(line);
        if (line.empty() || line[0] == '#') continue;
        std::string idx_field = line, label;
        if (auto c = line.find(','); c != std::string::npos) {
            idx_field = detail::strip(line.substr(0, c));
            label = detail::strip(line.substr(c + 1));
            if (auto c2 = label.find(','); c2 != std::string::npos) label = detail::strip(label.substr(0, c2));
        }
        int64_t idx = 0;
        if (!detail::parse_i64(idx_field, idx))
            throw ParseError("annotation csv line " + std::to_string(line_no) + ": bad sample index `" + idx_field +
                             "`");
        if (idx < 0) throw ParseError("annotation csv line " + std::to_string(line_no) + ": negative sample index");
        if (!label.empty() && !beat_labels.count(label)) continue;
        ann.push_back(idx);
    }
    std::sort(ann.begin(), ann.end());
    ann.erase(std::unique(ann.begin(), ann.end()), ann.end());
    return ann;
}

// Linear-interpolation resampler. Output length round(len * fs_out / fs_in);
// sample j is the source evaluated at time j / fs_out.
inline std::vector<double> resample_linear(const std::vector<double>& x, double fs_in, double fs_out) {
    if (!(fs_in > 0) || !(fs_out > 0)) throw ConfigError("resample_linear: rates must be positive");
    if (x.size() < 2) throw InputError("resample_linear: need at least 2 samples");
    if (fs_in == fs_out) return x;
    int64_t n_in = static_cast<int64_t>(x.size());
    int64_t n_out = static_cast<int64_t>(std::llround(static_cast<double>(n_in) * fs_out / fs_in));
    std::vector<double> out(static_cast<size_t>(n_out));
    double ratio = fs_in / fs_out;
    for (int64_t j = 0; j < n_out; ++j) {
        double p = static_cast<double>(j) * ratio;
        if (p >= static_cast<double>(n_in - 1)) {
            out[static_cast<size_t>(j)] = x.back();
            continue;
        }
        int64_t i0 = static_cast<int64_t>(p);
        double frac = p - static_cast<double>(i0);
        out[static_cast<size_t>(j)] = x[static_cast<size_t>(i0)] * (1.0 - frac) + x[static_cast<size_t>(i0) + 1] * frac;
    }
    return out;
}

inline EcgRecord resample_record(const EcgRecord& rec, double fs_out) {
    EcgRecord out = rec;
    out.samples = resample_linear(rec.samples, rec.fs, fs_out);
    out.fs = fs_out;
    return out;
}

// Maps indices by round(i * fs_out / fs_in) with ties to even; collisions
// after rounding are dropped to keep the sequence strictly increasing.
inline BeatAnnotations rescale_annotations(const BeatAnnotations& ann, double fs_in, double fs_out) {
    if (!(fs_in > 0) || !(fs_out > 0)) throw ConfigError("rescale_annotations: rates must be positive");
    BeatAnnotations out;
    out.reserve(ann.size());
    for (int64_t i : ann) {
        int64_t j = static_cast<int64_t>(std::nearbyint(static_cast<double>(i) * fs_out / fs_in));
        if (out.empty() || j > out.back()) out.push_back(j);
    }
    return out;
}

// Cuts consecutive non-overlapping windows of win_seconds * fs samples. Peak
// indices are localized by subtracting the window offset. The trailing partial
// window is dropped when drop_partial, else zero-padded with pad_samples set.
inline std::vector<Window> window_record(const EcgRecord& rec, const BeatAnnotations& ann, double win_seconds,
                                         bool drop_partial) {
    double l_real = win_seconds * rec.fs;
    if (!(l_real > 0) || !nearly_integer(l_real))
        throw ConfigError("window_record: win_seconds * fs must be a positive integer");
    int64_t L = static_cast<int64_t>(std::llround(l_real));
    int64_t n = static_cast<int64_t>(rec.samples.size());
    std::vector<Window> out;
    size_t ai = 0;
    for (int64_t off = 0; off < n; off += L) {
        int64_t avail = std::min<int64_t>(L, n - off);
        if (avail < L && drop_partial) break;
        Window w;
        w.source_record_id = rec.record_id;
        w.offset = off;
        w.fs = rec.fs;
        w.source_fs = rec.fs;
        w.pad_samples = L - avail;
        w.samples.assign(static_cast<size_t>(L), 0.0);
        std::copy(rec.samples.begin() + off, rec.samples.begin() + off + avail, w.samples.begin());
        while (ai < ann.size() && ann[ai] < off) ++ai;
        for (size_t k = ai; k < ann.size() && ann[k] < off + avail; ++k) w.peak_indices.push_back(ann[k] - off);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace rpk

#endif  // RPK_SIGNAL_IO_HPP
