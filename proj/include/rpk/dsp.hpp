#ifndef RPK_DSP_HPP
#define RPK_DSP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rpk/signal_io.hpp"

namespace rpk::dsp {

// RBJ-cookbook biquad, direct form I, zero initial state.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    static Biquad bandpass(double fs, double f0, double q) {
        double w0 = 2.0 * 3.14159265358979323846 * f0 / fs;
        double alpha = std::sin(w0) / (2.0 * q);
        double a0 = 1.0 + alpha;
        Biquad f;
        f.b0 = alpha / a0;
        f.b1 = 0.0;
        f.b2 = -alpha / a0;
        f.a1 = -2.0 * std::cos(w0) / a0;
        f.a2 = (1.0 - alpha) / a0;
        return f;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(x.size(), 0.0);
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            double yi = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x[i];
            y2 = y1;
            y1 = yi;
            y[i] = yi;
        }
        return y;
    }
};

// causal box filter; window clipped at the start
inline std::vector<double> moving_average(const std::vector<double>& x, int64_t window) {
    if (window < 1) window = 1;
    std::vector<double> y(x.size(), 0.0);
    double acc = 0.0;
    for (int64_t i = 0; i < static_cast<int64_t>(x.size()); ++i) {
        acc += x[static_cast<size_t>(i)];
        if (i >= window) acc -= x[static_cast<size_t>(i - window)];
        y[static_cast<size_t>(i)] = acc / static_cast<double>(std::min<int64_t>(i + 1, window));
    }
    return y;
}

inline std::vector<double> abs_diff(const std::vector<double>& x) {
    std::vector<double> y(x.size(), 0.0);
    for (size_t i = 1; i < x.size(); ++i) y[i] = std::abs(x[i] - x[i - 1]);
    return y;
}

// indices of local maxima; plateaus resolve to their midpoint
inline std::vector<int64_t> local_maxima(const std::vector<double>& x) {
    std::vector<int64_t> out;
    int64_t n = static_cast<int64_t>(x.size());
    int64_t i = 1;
    while (i < n - 1) {
        if (x[static_cast<size_t>(i)] > x[static_cast<size_t>(i - 1)]) {
            int64_t j = i;
            while (j + 1 < n && x[static_cast<size_t>(j + 1)] == x[static_cast<size_t>(i)]) ++j;
            if (j + 1 < n && x[static_cast<size_t>(j + 1)] < x[static_cast<size_t>(i)]) out.push_back((i + j) / 2);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

// argmax of |x - local baseline| near idx; snaps detections onto the R wave
inline int64_t refine_to_signal_peak(const std::vector<double>& x, double fs, int64_t idx, double window_s,
                                     double baseline_s = 0.28) {
    int64_t n = static_cast<int64_t>(x.size());
    int64_t w = static_cast<int64_t>(window_s * fs);
    int64_t bw = std::max<int64_t>(1, static_cast<int64_t>(baseline_s * fs / 2));
    int64_t lo = std::max<int64_t>(0, idx - w);
    int64_t hi = std::min<int64_t>(n - 1, idx + w);
    int64_t best = idx;
    double best_v = -1.0;
    for (int64_t i = lo; i <= hi; ++i) {
        int64_t blo = std::max<int64_t>(0, i - bw);
        int64_t bhi = std::min<int64_t>(n - 1, i + bw);
        double base = 0.0;
        for (int64_t j = blo; j <= bhi; ++j) base += x[static_cast<size_t>(j)];
        base /= static_cast<double>(bhi - blo + 1);
        double v = std::abs(x[static_cast<size_t>(i)] - base);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

inline BeatAnnotations enforce_refractory(std::vector<int64_t> peaks, double fs, double refractory_s) {
    std::sort(peaks.begin(), peaks.end());
    peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());
    int64_t gap = static_cast<int64_t>(refractory_s * fs);
    BeatAnnotations out;
    for (int64_t p : peaks)
        if (out.empty() || p - out.back() >= gap) out.push_back(p);
    return out;
}

}  // namespace rpk::dsp

#endif  // RPK_DSP_HPP
