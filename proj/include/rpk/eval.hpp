#ifndef RPK_EVAL_HPP
#define RPK_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rpk/common.hpp"
#include "rpk/dsp.hpp"
#include "rpk/signal_io.hpp"

namespace rpk {

struct MatchResult {
    int64_t tp = 0, fp = 0, fn = 0;
    std::vector<std::pair<size_t, size_t>> pairs;  // (pred array index, ref array index)
};

struct EvalReport {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    int64_t tp = 0, fp = 0, fn = 0;
};

struct RecordEval {
    std::string record_id;
    MatchResult match;
    EvalReport report;
};

// One-to-one matching within tol_ms: references in order each claim their
// nearest unclaimed prediction (ties -> earlier prediction).
inline MatchResult match_peaks(const BeatAnnotations& pred, const BeatAnnotations& ref, double fs,
                               double tol_ms = 75.0) {
    auto check_sorted = [](const BeatAnnotations& v, const char* which) {
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i] <= v[i - 1]) throw InputError(std::string("match_peaks: ") + which + " not strictly increasing");
    };
    check_sorted(pred, "pred");
    check_sorted(ref, "ref");
    if (!(fs > 0)) throw InputError("match_peaks: fs must be positive");
    const double tol = tol_ms * fs / 1000.0;  // samples

    MatchResult mr;
    std::vector<bool> claimed(pred.size(), false);
    for (size_t r = 0; r < ref.size(); ++r) {
        double best_d = tol;
        size_t best_i = pred.size();
        for (size_t i = 0; i < pred.size(); ++i) {
            if (claimed[i]) continue;
            double d = std::abs(static_cast<double>(pred[i]) - static_cast<double>(ref[r]));
            if (d < best_d || (d == best_d && best_i == pred.size())) {
                best_d = d;
                best_i = i;  // strict < keeps the earlier prediction on ties
            }
        }
        if (best_i < pred.size()) {
            claimed[best_i] = true;
            mr.pairs.emplace_back(best_i, r);
        }
    }
    mr.tp = static_cast<int64_t>(mr.pairs.size());
    mr.fp = static_cast<int64_t>(pred.size()) - mr.tp;
    mr.fn = static_cast<int64_t>(ref.size()) - mr.tp;
    return mr;
}

// Precision/recall/F1 with the empty-vs-empty convention: a 0/0 ratio is 1.0
// when both sides are empty, else 0.0.
inline EvalReport metrics(const MatchResult& mr) {
    EvalReport r;
    r.tp = mr.tp;
    r.fp = mr.fp;
    r.fn = mr.fn;
    int64_t n_pred = mr.tp + mr.fp;
    int64_t n_ref = mr.tp + mr.fn;
    bool both_empty = n_pred == 0 && n_ref == 0;
    r.precision = n_pred > 0 ? static_cast<double>(mr.tp) / static_cast<double>(n_pred) : (both_empty ? 1.0 : 0.0);
    r.recall = n_ref > 0 ? static_cast<double>(mr.tp) / static_cast<double>(n_ref) : (both_empty ? 1.0 : 0.0);
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

// Pools TP/FP/FN over records (micro-averaging).
inline EvalReport micro_average(const std::vector<RecordEval>& records) {
    MatchResult pooled;
    for (const auto& r : records) {
        pooled.tp += r.match.tp;
        pooled.fp += r.match.fp;
        pooled.fn += r.match.fn;
    }
    return metrics(pooled);
}

// ---------------------------------------------------------------------------
// Noise mixing and synthetic data
// ---------------------------------------------------------------------------

enum class NoiseKind { baseline_wander, muscle_artifact, electrode_motion, white };

inline NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "baseline_wander") return NoiseKind::baseline_wander;
    if (name == "muscle_artifact") return NoiseKind::muscle_artifact;
    if (name == "electrode_motion") return NoiseKind::electrode_motion;
    if (name == "white") return NoiseKind::white;
    throw ConfigError("unknown noise kind `" + name + "`");
}

inline const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::baseline_wander: return "baseline_wander";
        case NoiseKind::muscle_artifact: return "muscle_artifact";
        case NoiseKind::electrode_motion: return "electrode_motion";
        default: return "white";
    }
}

// Parameterized stand-ins for the stress-test artifact classes: slow sinusoid
// drift, band-limited bursts, step-plus-spike transients, and white noise.
inline std::vector<double> gen_noise(NoiseKind kind, int64_t n, double fs, uint64_t seed) {
    if (n <= 0) throw InputError("gen_noise: length must be positive");
    Rng rng(seed ^ (static_cast<uint64_t>(kind) + 1) * 0x9e3779b97f4a7c15ULL);
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    switch (kind) {
        case NoiseKind::baseline_wander: {
            for (int j = 0; j < 3; ++j) {
                double f = rng.uniform(0.05, 0.45);
                double a = rng.uniform(0.5, 1.0);
                double ph = rng.uniform(0.0, 2.0 * M_PI);
                for (int64_t i = 0; i < n; ++i)
                    out[static_cast<size_t>(i)] += a * std::sin(2.0 * M_PI * f * static_cast<double>(i) / fs + ph);
            }
            break;
        }
        case NoiseKind::muscle_artifact: {
            // band-limited (QRS-band) noise under an on/off burst envelope
            std::vector<double> w(static_cast<size_t>(n));
            for (auto& x : w) x = rng.normal();
            const double f_lo = 5.0, f_hi = 30.0;
            double f0 = std::sqrt(f_lo * f_hi);
            auto band = dsp::Biquad::bandpass(fs, f0, f0 / (f_hi - f_lo)).apply(w);
            double env = 0.0, level = 0.2;
            int64_t until = 0;
            for (int64_t i = 0; i < n; ++i) {
                if (i >= until) {
                    level = rng.uniform() < 0.45 ? rng.uniform(0.8, 1.5) : rng.uniform(0.03, 0.15);
                    until = i + static_cast<int64_t>(rng.uniform(0.4, 2.5) * fs);
                }
                env += 0.008 * (level - env);
                out[static_cast<size_t>(i)] = env * band[static_cast<size_t>(i)];
            }
            break;
        }
        case NoiseKind::electrode_motion: {
            double level = 0.0;
            double spike = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                if (rng.uniform() < 0.8 / fs) level += rng.uniform(-1.5, 1.5);  // step
                if (rng.uniform() < 1.2 / fs) spike = rng.uniform(-3.0, 3.0);   // transient
                spike *= std::exp(-8.0 / fs);
                out[static_cast<size_t>(i)] = level + spike + 0.15 * rng.normal();
            }
            break;
        }
        case NoiseKind::white: {
            for (auto& x : out) x = rng.normal();
            break;
        }
    }
    return out;
}

// Adds noise scaled so the mixture hits the target SNR:
//   alpha = sqrt(P_clean / (P_noise * 10^(snr_db/10)))
// with powers as mean squared amplitude over the mixed extent. Shorter noise
// is tiled.
inline EcgRecord mix_noise(const EcgRecord& clean, const std::vector<double>& noise, double snr_db) {
    if (clean.samples.empty()) throw InputError("mix_noise: empty record");
    if (noise.empty()) throw InputError("mix_noise: empty noise");
    if (!std::isfinite(snr_db)) throw InputError("mix_noise: snr must be finite");
    const int64_t n = static_cast<int64_t>(clean.samples.size());
    double p_clean = 0.0;
    for (double x : clean.samples) p_clean += x * x;
    p_clean /= static_cast<double>(n);
    if (p_clean <= 0.0) throw InputError("mix_noise: clean record has zero power");
    double p_noise = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double v = noise[static_cast<size_t>(i % static_cast<int64_t>(noise.size()))];
        p_noise += v * v;
    }
    p_noise /= static_cast<double>(n);
    if (p_noise <= 0.0) throw InputError("mix_noise: noise has zero power over the mixed extent");
    const double alpha = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    EcgRecord out = clean;
    for (int64_t i = 0; i < n; ++i)
        out.samples[static_cast<size_t>(i)] += alpha * noise[static_cast<size_t>(i % static_cast<int64_t>(noise.size()))];
    return out;
}

// Sum of Gaussian-bump P-QRS-T complexes at jittered RR intervals; the R bump
// centers are the returned ground truth. First beat at 0.5 s.
inline std::pair<EcgRecord, BeatAnnotations> synth_ecg(double fs, double duration_s, double mean_hr_bpm,
                                                       double hr_jitter, uint64_t seed) {
    if (!(mean_hr_bpm >= 30.0 && mean_hr_bpm <= 220.0)) throw ConfigError("synth_ecg: mean HR outside [30,220] bpm");
    if (!(fs > 0) || !(duration_s > 0)) throw ConfigError("synth_ecg: fs and duration must be positive");
    if (hr_jitter < 0.0 || hr_jitter >= 0.5) throw ConfigError("synth_ecg: hr_jitter in [0, 0.5)");
    Rng rng(seed);
    const int64_t n = static_cast<int64_t>(std::llround(duration_s * fs));
    EcgRecord rec;
    rec.record_id = "synth-" + std::to_string(seed);
    rec.lead_name = "synthetic";
    rec.fs = fs;
    rec.samples.assign(static_cast<size_t>(n), 0.0);

    const double rr = 60.0 / mean_hr_bpm;
    BeatAnnotations peaks;
    std::vector<double> r_amp;
    double t = 0.5;
    // keep a tail margin so the last complex fits inside the record
    const int64_t margin = static_cast<int64_t>(0.2 * fs);
    while (true) {
        int64_t m = static_cast<int64_t>(std::llround(t * fs));
        if (m >= n - margin) break;
        peaks.push_back(m);
        r_amp.push_back(1.0 * rng.uniform(0.9, 1.1));
        t += rr * (1.0 + hr_jitter * rng.uniform(-1.0, 1.0));
    }

    struct Bump {
        double dt_s, amp, sigma_s;
    };
    const Bump shape[] = {
        {-0.160, 0.12, 0.022},  // P
        {-0.025, -0.15, 0.008}, // Q
        {0.000, 1.00, 0.006},   // R (scaled per beat)
        {0.025, -0.25, 0.008},  // S
        {0.220, 0.30, 0.045},   // T
    };
    for (size_t k = 0; k < peaks.size(); ++k) {
        double center = static_cast<double>(peaks[k]) / fs;
        for (const auto& b : shape) {
            double amp = b.amp == 1.0 ? r_amp[k] : b.amp;
            double mu = center + b.dt_s;
            int64_t lo = std::max<int64_t>(0, static_cast<int64_t>((mu - 5 * b.sigma_s) * fs));
            int64_t hi = std::min<int64_t>(n - 1, static_cast<int64_t>((mu + 5 * b.sigma_s) * fs) + 1);
            for (int64_t i = lo; i <= hi; ++i) {
                double d = static_cast<double>(i) / fs - mu;
                rec.samples[static_cast<size_t>(i)] += amp * std::exp(-d * d / (2.0 * b.sigma_s * b.sigma_s));
            }
        }
    }
    return {std::move(rec), std::move(peaks)};
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

using DetectorFn = std::function<BeatAnnotations(const EcgRecord&)>;

struct LabeledRecord {
    EcgRecord record;
    BeatAnnotations peaks;
};

struct DetectorReport {
    std::string detector_name;
    EvalReport aggregate;
    std::vector<RecordEval> records;
};

inline DetectorReport evaluate_detector(const std::string& name, const DetectorFn& detect,
                                        const std::vector<LabeledRecord>& dataset, double tol_ms = 75.0) {
    DetectorReport rep;
    rep.detector_name = name;
    for (const auto& item : dataset) {
        RecordEval re;
        re.record_id = item.record.record_id;
        BeatAnnotations pred = detect(item.record);
        re.match = match_peaks(pred, item.peaks, item.record.fs, tol_ms);
        re.report = metrics(re.match);
        rep.records.push_back(std::move(re));
    }
    rep.aggregate = micro_average(rep.records);
    return rep;
}

inline std::vector<DetectorReport> compare_detectors(const std::vector<LabeledRecord>& dataset,
                                                     const std::vector<std::pair<std::string, DetectorFn>>& detectors,
                                                     double tol_ms = 75.0) {
    std::vector<DetectorReport> out;
    for (const auto& [name, fn] : detectors) out.push_back(evaluate_detector(name, fn, dataset, tol_ms));
    return out;
}

struct SnrLevelReport {
    double snr_db = 0.0;
    EvalReport report;
    std::vector<RecordEval> records;
};

// Mixes each record at each SNR level (fresh noise per record, deterministic
// per seed) and evaluates the detector on the mixtures.
inline std::vector<SnrLevelReport> snr_sweep(const DetectorFn& detect, const std::vector<LabeledRecord>& clean,
                                             const std::vector<double>& levels_db,
                                             NoiseKind kind = NoiseKind::muscle_artifact, uint64_t seed = 1,
                                             double tol_ms = 75.0) {
    if (clean.empty()) throw InputError("snr_sweep: need at least one annotated record");
    std::vector<SnrLevelReport> out;
    for (double level : levels_db) {
        SnrLevelReport lr;
        lr.snr_db = level;
        for (size_t i = 0; i < clean.size(); ++i) {
            const auto& item = clean[i];
            auto noise = gen_noise(kind, static_cast<int64_t>(item.record.samples.size()), item.record.fs,
                                   seed + 1000 * i);
            EcgRecord noisy = mix_noise(item.record, noise, level);
            RecordEval re;
            re.record_id = item.record.record_id;
            re.match = match_peaks(detect(noisy), item.peaks, noisy.fs, tol_ms);
            re.report = metrics(re.match);
            lr.records.push_back(std::move(re));
        }
        lr.report = micro_average(lr.records);
        out.push_back(std::move(lr));
    }
    return out;
}

// Report CSV: `detector,dataset,snr_db,precision,recall,f1` rows.
inline std::string report_csv_header() { return "detector,dataset,snr_db,precision,recall,f1\n"; }

inline std::string report_csv_row(const std::string& detector, const std::string& dataset, const std::string& snr_db,
                                  const EvalReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << detector << "," << dataset << "," << snr_db << "," << r.precision << "," << r.recall << "," << r.f1 << "\n";
    return os.str();
}

}  // namespace rpk

#endif  // RPK_EVAL_HPP
