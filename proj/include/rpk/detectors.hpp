#ifndef RPK_DETECTORS_HPP
#define RPK_DETECTORS_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "rpk/common.hpp"
#include "rpk/dsp.hpp"
#include "rpk/eval.hpp"
#include "rpk/signal_io.hpp"

namespace rpk {

struct DetectorOutput {
    BeatAnnotations peaks;
    std::string detector_name;
};



// ---------------------------------------------------------------------------
// Hamilton detector: band-pass 8-16 Hz, differentiate, rectify, 80 ms moving
// average, adaptive QRS/noise averages with T-wave rejection and search-back.
// ---------------------------------------------------------------------------

struct HamiltonConstants {
    double band_lo_hz = 8.0, band_hi_hz = 16.0;
    double ma_window_s = 0.08;
    double threshold_coeff = 0.3125;  // position between noise and QRS averages
    double refractory_s = 0.2;
    double twave_window_s = 0.36;
    size_t avg_depth = 8;             // running-average list depth
    double search_back_rr = 1.5;      // missed-beat trigger, in mean RR
    double search_back_div = 2.0;     // search-back threshold divisor
    double refine_window_s = 0.1;
};

inline DetectorOutput hamilton_detect(const EcgRecord& rec, const HamiltonConstants& c = {}) {
    if (!(rec.fs >= 100.0)) throw InputError("hamilton: sampling rate must be >= 100 Hz");
    const double fs = rec.fs;
    const int64_t n = static_cast<int64_t>(rec.samples.size());
    if (static_cast<double>(n) < 2.0 * fs) throw InputError("hamilton: record shorter than 2 s");

    std::vector<double> centered = rec.samples;
    double mean = 0.0;
    for (double v : centered) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : centered) v -= mean;  // kill the DC step at the filter onset
    auto bp = dsp::Biquad::bandpass(fs, std::sqrt(c.band_lo_hz * c.band_hi_hz),
                                    std::sqrt(c.band_lo_hz * c.band_hi_hz) / (c.band_hi_hz - c.band_lo_hz))
                  .apply(centered);
    auto ma = dsp::moving_average(dsp::abs_diff(bp), static_cast<int64_t>(c.ma_window_s * fs));
    auto cands = dsp::local_maxima(ma);

    // prime the averages from the lead-in so the threshold starts sane
    int64_t prime = std::min<int64_t>(n, static_cast<int64_t>(2.0 * fs));
    double prime_max = 0.0, prime_mean = 0.0;
    for (int64_t i = 0; i < prime; ++i) {
        prime_max = std::max(prime_max, ma[static_cast<size_t>(i)]);
        prime_mean += ma[static_cast<size_t>(i)];
    }
    prime_mean /= static_cast<double>(std::max<int64_t>(1, prime));

    std::deque<double> qrs_amps{prime_max}, noise_amps{prime_mean};
    std::deque<int64_t> rr_list;
    auto mean_of = [](const std::deque<double>& d) {
        double s = 0.0;
        for (double v : d) s += v;
        return d.empty() ? 0.0 : s / static_cast<double>(d.size());
    };
    auto push_capped = [&c](std::deque<double>& d, double v) {
        d.push_back(v);
        if (d.size() > c.avg_depth) d.pop_front();
    };

    const int64_t refractory = static_cast<int64_t>(c.refractory_s * fs);
    const int64_t twave_win = static_cast<int64_t>(c.twave_window_s * fs);
    std::vector<int64_t> beats;
    std::vector<std::pair<int64_t, double>> skipped;  // sub-threshold peaks for search-back

    auto slope_around = [&](int64_t p) {
        double m = 0.0;
        for (int64_t i = std::max<int64_t>(1, p - refractory / 4); i <= std::min(n - 1, p + refractory / 4); ++i)
            m = std::max(m, std::abs(bp[static_cast<size_t>(i)] - bp[static_cast<size_t>(i - 1)]));
        return m;
    };

    for (int64_t p : cands) {
        double v = ma[static_cast<size_t>(p)];
        double th = mean_of(noise_amps) + c.threshold_coeff * (mean_of(qrs_amps) - mean_of(noise_amps));
        if (!beats.empty() && p - beats.back() < refractory) continue;
        bool is_qrs = v > th;
        if (is_qrs && !beats.empty() && p - beats.back() < twave_win)
            if (slope_around(p) < 0.5 * slope_around(beats.back())) is_qrs = false;  // T wave
        if (is_qrs) {
            if (!beats.empty()) {
                rr_list.push_back(p - beats.back());
                if (rr_list.size() > c.avg_depth) rr_list.pop_front();
            }
            beats.push_back(p);
            push_capped(qrs_amps, v);
            // search-back: a long gap suggests a missed beat between the last two
            if (rr_list.size() >= 2) {
                double rr_mean = 0.0;
                for (int64_t rr : rr_list) rr_mean += static_cast<double>(rr);
                rr_mean /= static_cast<double>(rr_list.size());
                if (static_cast<double>(rr_list.back()) > c.search_back_rr * rr_mean) {
                    int64_t lo = beats[beats.size() - 2], hi = beats.back();
                    int64_t best = -1;
                    double best_v = th / c.search_back_div;
                    for (const auto& [sp, sv] : skipped)
                        if (sp > lo + refractory && sp < hi - refractory && sv > best_v) {
                            best = sp;
                            best_v = sv;
                        }
                    if (best >= 0) beats.insert(beats.end() - 1, best);
                }
            }
        } else {
            push_capped(noise_amps, v);
            skipped.emplace_back(p, v);
        }
    }

    std::vector<int64_t> refined;
    refined.reserve(beats.size());
    for (int64_t p : beats) refined.push_back(dsp::refine_to_signal_peak(rec.samples, fs, p, c.refine_window_s));
    DetectorOutput out;
    out.detector_name = "hamilton";
    out.peaks = dsp::enforce_refractory(std::move(refined), fs, c.refractory_s);
    return out;
}

// ---------------------------------------------------------------------------
// Christov detector: complex lead from moving-average-filtered absolute
// derivative, combined adaptive threshold M + F + R.
// ---------------------------------------------------------------------------

struct ChristovConstants {
    double ma_power_s = 0.02;    // powerline suppression window
    double ma_emg_s = 0.028;     // EMG suppression window
    double ma_lead_s = 0.04;     // complex-lead smoothing window
    double m_coeff = 0.6;        // M = coeff * max(lead) around a beat
    size_t mm_depth = 5;
    double m_decay_until_s = 1.2; // linear M decay endpoint after a beat
    double f_window_s = 0.35;
    double f_gain = 1.0 / 150.0;
    double r_fraction = 2.0 / 3.0;  // R stays zero for this fraction of mean RR
    double r_depth = 0.4;           // R floor, as a fraction of M base
    size_t rr_depth = 5;
    double refractory_s = 0.2;
    double refine_window_s = 0.1;
};

inline DetectorOutput christov_detect(const EcgRecord& rec, const ChristovConstants& c = {}) {
    if (!(rec.fs >= 100.0)) throw InputError("christov: sampling rate must be >= 100 Hz");
    const double fs = rec.fs;
    const int64_t n = static_cast<int64_t>(rec.samples.size());
    if (static_cast<double>(n) < 2.0 * fs) throw InputError("christov: record shorter than 2 s");

    auto pre = dsp::moving_average(rec.samples, static_cast<int64_t>(c.ma_power_s * fs));
    pre = dsp::moving_average(pre, static_cast<int64_t>(c.ma_emg_s * fs));
    std::vector<double> lead(pre.size(), 0.0);
    for (int64_t i = 1; i + 1 < n; ++i)
        lead[static_cast<size_t>(i)] =
            std::abs(pre[static_cast<size_t>(i + 1)] - pre[static_cast<size_t>(i - 1)]) * fs / 2.0;
    lead = dsp::moving_average(lead, static_cast<int64_t>(c.ma_lead_s * fs));

    const int64_t ms50 = static_cast<int64_t>(0.05 * fs);
    const int64_t ms200 = static_cast<int64_t>(0.2 * fs);
    const int64_t ms300 = static_cast<int64_t>(0.3 * fs);
    const int64_t ms350 = static_cast<int64_t>(c.f_window_s * fs);
    const int64_t ms1200 = static_cast<int64_t>(c.m_decay_until_s * fs);
    const int64_t refractory = static_cast<int64_t>(c.refractory_s * fs);

    std::deque<double> mm;
    std::deque<int64_t> rr_list;
    double m_cur = 0.0;
    double init_max = 0.0;
    for (int64_t i = 0; i < std::min<int64_t>(n, static_cast<int64_t>(5.0 * fs)); ++i)
        init_max = std::max(init_max, lead[static_cast<size_t>(i)]);
    m_cur = c.m_coeff * init_max;
    mm.push_back(m_cur);

    double f_cur = 0.0;
    for (int64_t i = 0; i < std::min<int64_t>(n, ms350); ++i) f_cur += lead[static_cast<size_t>(i)];
    f_cur /= static_cast<double>(std::max<int64_t>(1, std::min<int64_t>(n, ms350)));

    auto mm_mean = [&mm]() {
        double s = 0.0;
        for (double v : mm) s += v;
        return s / static_cast<double>(mm.size());
    };

    std::vector<int64_t> beats;
    double new_m5 = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        int64_t since = beats.empty() ? std::numeric_limits<int64_t>::max() : i - beats.back();

        // M component
        if (!beats.empty() && since <= ms200) {
            new_m5 = std::max(new_m5, c.m_coeff * lead[static_cast<size_t>(i)]);
            if (since == ms200) {
                if (!mm.empty() && new_m5 > 1.5 * mm.back()) new_m5 = 1.1 * mm.back();
                if (new_m5 > 0.0) mm.push_back(new_m5);
                if (mm.size() > c.mm_depth) mm.pop_front();
            }
        } else if (!beats.empty() && since > ms200 && since < ms1200) {
            double frac = static_cast<double>(since - ms200) / static_cast<double>(ms1200 - ms200);
            m_cur = mm_mean() * (1.0 - 0.4 * frac);
        } else if (!beats.empty()) {
            m_cur = 0.6 * mm_mean();
        }

        // F component: rising trend of the recent lead vs 300 ms ago
        if (i > ms350) {
            double max_new = 0.0, max_old = 0.0;
            for (int64_t j = i - ms50; j <= i; ++j) max_new = std::max(max_new, lead[static_cast<size_t>(j)]);
            for (int64_t j = i - ms350; j <= i - ms300; ++j) max_old = std::max(max_old, lead[static_cast<size_t>(j)]);
            f_cur += (max_new - max_old) * c.f_gain;
        }

        // R component: expectation window from the RR history
        double r_cur = 0.0;
        if (!beats.empty() && rr_list.size() >= 2) {
            double rr_mean = 0.0;
            for (int64_t rr : rr_list) rr_mean += static_cast<double>(rr);
            rr_mean /= static_cast<double>(rr_list.size());
            double start = c.r_fraction * rr_mean;
            if (static_cast<double>(since) > start) {
                double frac = (static_cast<double>(since) - start) / (rr_mean - start);
                r_cur = -c.r_depth * mm_mean() * std::min(1.0, frac);
            }
        }

        double threshold = m_cur + f_cur + r_cur;
        if (since >= refractory && lead[static_cast<size_t>(i)] > threshold) {
            if (!beats.empty()) {
                rr_list.push_back(i - beats.back());
                if (rr_list.size() > c.rr_depth) rr_list.pop_front();
            }
            beats.push_back(i);
            new_m5 = 0.0;
        }
    }

    std::vector<int64_t> refined;
    refined.reserve(beats.size());
    for (int64_t p : beats) refined.push_back(dsp::refine_to_signal_peak(rec.samples, fs, p, c.refine_window_s));
    DetectorOutput out;
    out.detector_name = "christov";
    out.peaks = dsp::enforce_refractory(std::move(refined), fs, c.refractory_s);
    return out;
}

// ---------------------------------------------------------------------------
// Stationary wavelet transform (undecimated a-trous, periodic extension) and
// the SWT detector: squared detail coefficients at the QRS scale, adaptive
// threshold, peaks snapped to the raw signal.
// ---------------------------------------------------------------------------

namespace wavelet {

// db4 (8-tap) orthonormal scaling filter
inline const std::vector<double>& db4_lo() {
    static const std::vector<double> h = {0.230377813308855,  0.714846570552542,  0.630880767929590,
                                          -0.027983769416984, -0.187034811718881, 0.030841381835987,
                                          0.032883011666983,  -0.010597401784997};
    return h;
}

inline const std::vector<double>& db4_hi() {
    static const std::vector<double> g = [] {
        const auto& h = db4_lo();
        std::vector<double> g_(h.size());
        for (size_t k = 0; k < h.size(); ++k) g_[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[h.size() - 1 - k];
        return g_;
    }();
    return g;
}

}  // namespace wavelet

struct SwtResult {
    std::vector<std::vector<double>> details;  // details[j] for level j+1, input length each
    std::vector<double> approx;                // final-level approximation
};

inline SwtResult swt(const std::vector<double>& x, int levels) {
    if (levels < 1) throw ConfigError("swt: levels must be >= 1");
    if (x.empty()) throw InputError("swt: empty input");
    const auto& h = wavelet::db4_lo();
    const auto& g = wavelet::db4_hi();
    const int64_t n = static_cast<int64_t>(x.size());
    SwtResult res;
    std::vector<double> a = x;
    int64_t dilation = 1;
    for (int lvl = 0; lvl < levels; ++lvl) {
        std::vector<double> a_next(static_cast<size_t>(n), 0.0), d(static_cast<size_t>(n), 0.0);
        for (int64_t i = 0; i < n; ++i) {
            double sa = 0.0, sd = 0.0;
            for (size_t k = 0; k < h.size(); ++k) {
                int64_t idx = (i + static_cast<int64_t>(k) * dilation) % n;
                sa += h[k] * a[static_cast<size_t>(idx)];
                sd += g[k] * a[static_cast<size_t>(idx)];
            }
            a_next[static_cast<size_t>(i)] = sa;
            d[static_cast<size_t>(i)] = sd;
        }
        res.details.push_back(std::move(d));
        a = std::move(a_next);
        dilation *= 2;
    }
    res.approx = std::move(a);
    return res;
}

// Inverse transform; the undecimated filter bank is a tight frame with bound
// 2 per level, so reconstruction is the adjoint divided by 2.
inline std::vector<double> iswt(const SwtResult& res) {
    if (res.details.empty()) throw InputError("iswt: empty decomposition");
    const auto& h = wavelet::db4_lo();
    const auto& g = wavelet::db4_hi();
    const int64_t n = static_cast<int64_t>(res.approx.size());
    std::vector<double> a = res.approx;
    for (int lvl = static_cast<int>(res.details.size()) - 1; lvl >= 0; --lvl) {
        int64_t dilation = 1;
        for (int j = 0; j < lvl; ++j) dilation *= 2;
        const auto& d = res.details[static_cast<size_t>(lvl)];
        std::vector<double> prev(static_cast<size_t>(n), 0.0);
        for (int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (size_t k = 0; k < h.size(); ++k) {
                int64_t idx = (i - static_cast<int64_t>(k) * dilation) % n;
                if (idx < 0) idx += n;
                s += h[k] * a[static_cast<size_t>(idx)] + g[k] * d[static_cast<size_t>(idx)];
            }
            prev[static_cast<size_t>(i)] = 0.5 * s;
        }
        a = std::move(prev);
    }
    return a;
}

struct SwtConstants {
    int level_override = 0;       // 0 = pick from the sampling rate
    double smooth_window_s = 0.05;
    double threshold_coeff = 0.35;  // between noise and signal peak estimates
    double peak_ema = 0.125;        // running estimate update rate
    double refractory_s = 0.2;
    double search_back_rr = 1.66;
    double refine_window_s = 0.05;
};

inline int swt_level_for_fs(double fs) {
    int level = static_cast<int>(std::lround(std::log2(fs / 125.0))) + 1;
    return std::max(1, std::min(5, level));
}

inline DetectorOutput swt_detect(const EcgRecord& rec, const SwtConstants& c = {}) {
    const double fs = rec.fs;
    if (!(fs > 0)) throw InputError("swt: sampling rate must be positive");
    int level = c.level_override > 0 ? c.level_override : swt_level_for_fs(fs);

    // reflect-pad short records so the coarsest dilation fits
    std::vector<double> x = rec.samples;
    int64_t min_len = static_cast<int64_t>(wavelet::db4_lo().size()) * (int64_t{1} << level);
    while (static_cast<int64_t>(x.size()) < std::max<int64_t>(2, min_len)) {
        size_t m = x.size();
        for (size_t i = 0; i < m && static_cast<int64_t>(x.size()) < min_len; ++i)
            x.push_back(x[m - 1 - i]);
        if (m == x.size()) break;  // degenerate single-sample guard
    }
    const int64_t n_orig = static_cast<int64_t>(rec.samples.size());

    auto decomp = swt(x, level);
    const auto& detail = decomp.details.back();
    std::vector<double> energy(detail.size());
    for (size_t i = 0; i < detail.size(); ++i) energy[i] = detail[i] * detail[i];
    energy = dsp::moving_average(energy, static_cast<int64_t>(c.smooth_window_s * fs));
    energy.resize(static_cast<size_t>(n_orig));

    auto cands = dsp::local_maxima(energy);
    const int64_t refractory = static_cast<int64_t>(c.refractory_s * fs);

    double spk = 0.0;
    int64_t prime = std::min<int64_t>(n_orig, static_cast<int64_t>(2.0 * fs));
    for (int64_t i = 0; i < prime; ++i) spk = std::max(spk, energy[static_cast<size_t>(i)]);
    double npk = 0.0;

    std::vector<int64_t> beats;
    std::vector<std::pair<int64_t, double>> skipped;
    std::deque<int64_t> rr_list;
    for (int64_t p : cands) {
        double v = energy[static_cast<size_t>(p)];
        double thr = npk + c.threshold_coeff * (spk - npk);
        if (!beats.empty() && p - beats.back() < refractory) continue;
        if (v > thr) {
            if (!beats.empty()) {
                rr_list.push_back(p - beats.back());
                if (rr_list.size() > 8) rr_list.pop_front();
            }
            beats.push_back(p);
            spk = c.peak_ema * v + (1.0 - c.peak_ema) * spk;
            if (rr_list.size() >= 2) {
                double rr_mean = 0.0;
                for (int64_t rr : rr_list) rr_mean += static_cast<double>(rr);
                rr_mean /= static_cast<double>(rr_list.size());
                if (static_cast<double>(rr_list.back()) > c.search_back_rr * rr_mean) {
                    int64_t lo = beats[beats.size() - 2], hi = beats.back();
                    int64_t best = -1;
                    double best_v = thr / 2.0;
                    for (const auto& [sp, sv] : skipped)
                        if (sp > lo + refractory && sp < hi - refractory && sv > best_v) {
                            best = sp;
                            best_v = sv;
                        }
                    if (best >= 0) beats.insert(beats.end() - 1, best);
                }
            }
        } else {
            npk = c.peak_ema * v + (1.0 - c.peak_ema) * npk;
            skipped.emplace_back(p, v);
        }
    }

    std::vector<int64_t> refined;
    refined.reserve(beats.size());
    for (int64_t p : beats)
        refined.push_back(dsp::refine_to_signal_peak(rec.samples, fs, p, c.refine_window_s));
    DetectorOutput out;
    out.detector_name = "swt";
    out.peaks = dsp::enforce_refractory(std::move(refined), fs, c.refractory_s);
    return out;
}

// Registry of the classic detectors behind the shared record-in/peaks-out
// interface; the CLI augments it with the model-backed entry.
inline std::vector<std::string> classic_detector_names() { return {"hamilton", "christov", "swt"}; }

inline DetectorFn make_classic_detector(const std::string& name) {
    if (name == "hamilton") return [](const EcgRecord& r) { return hamilton_detect(r).peaks; };
    if (name == "christov") return [](const EcgRecord& r) { return christov_detect(r).peaks; };
    if (name == "swt") return [](const EcgRecord& r) { return swt_detect(r).peaks; };
    throw ConfigError("unknown detector `" + name + "`");
}

}  // namespace rpk

#endif  // RPK_DETECTORS_HPP
