#ifndef RPK_TRAIN_HPP
#define RPK_TRAIN_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rpk/dtmap.hpp"
#include "rpk/model.hpp"
#include "rpk/optim.hpp"
#include "rpk/signal_io.hpp"

namespace rpk {

struct TrainSample {
    std::vector<double> input;   // window samples, length == model input_length
    std::vector<double> target;  // DT values, same length
};

struct TrainConfig {
    int64_t epochs = 500;
    int64_t batch_size = 16;
    uint64_t seed = 0;
    double initial_lr = 0.05;
    int64_t lr_decay_every = 150;
    int64_t checkpoint_every = 0;  // epochs between snapshots; 0 = start/end only
    int64_t val_every = 0;         // epochs between val metric calls; 0 = never
};

struct EpochLog {
    int64_t epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    double val_f1 = std::numeric_limits<double>::quiet_NaN();  // NaN = not evaluated
};

struct TrainLog {
    std::vector<EpochLog> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << "epoch,lr,mean_loss,val_f1\n";
        os.precision(12);
        for (const auto& r : rows) {
            os << r.epoch << "," << r.lr << "," << r.mean_loss << ",";
            if (std::isfinite(r.val_f1)) os << r.val_f1;
            os << "\n";
        }
        return os.str();
    }
};

inline TrainSample make_train_sample(const Window& w, int64_t cap_samples = 500) {
    TrainSample s;
    s.input = w.samples;
    DistanceMap dt = dt_from_peaks(w.peak_indices, static_cast<int64_t>(w.samples.size()), cap_samples, w.fs);
    s.target = std::move(dt.values);
    return s;
}

// Balanced k-fold partitions: shuffled indices dealt round-robin; fold i is
// the validation set, the rest train. Deterministic per seed.
inline std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> kfold_split(int64_t n_items, int64_t k,
                                                                                      uint64_t seed) {
    if (k < 1 || k > n_items) throw ConfigError("kfold_split: need 1 <= k <= n_items");
    std::vector<int64_t> idx(static_cast<size_t>(n_items));
    for (int64_t i = 0; i < n_items; ++i) idx[static_cast<size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<std::vector<int64_t>> folds(static_cast<size_t>(k));
    for (int64_t i = 0; i < n_items; ++i) folds[static_cast<size_t>(i % k)].push_back(idx[static_cast<size_t>(i)]);
    std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> out;
    for (int64_t f = 0; f < k; ++f) {
        std::vector<int64_t> train;
        for (int64_t g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), folds[static_cast<size_t>(g)].begin(), folds[static_cast<size_t>(g)].end());
        std::sort(train.begin(), train.end());
        std::vector<int64_t> val = folds[static_cast<size_t>(f)];
        std::sort(val.begin(), val.end());
        out.emplace_back(std::move(train), std::move(val));
    }
    return out;
}

// Seeded shuffle + minibatch Adam with the step LR schedule, BN in train mode.
// Per-epoch mean loss is element-weighted across batches. A non-finite batch
// loss restores the last snapshot and raises NumericsError.
inline TrainLog fit(Model& model, const std::vector<TrainSample>& data, const TrainConfig& tc,
                    const std::function<double(Model&)>& val_metric = {},
                    const std::function<void(Model&, int64_t)>& on_checkpoint = {}) {
    if (data.empty()) throw InputError("fit: empty dataset");
    const int64_t L = model.config().input_length;
    for (const auto& s : data) {
        if (static_cast<int64_t>(s.input.size()) != L || static_cast<int64_t>(s.target.size()) != L)
            throw ShapeError("fit: sample length mismatch vs model input_length");
        for (double t : s.target)
            if (!(t >= 0.0 && t <= 1.0)) throw InputError("fit: targets must lie in [0,1]");
    }
    if (tc.epochs < 0 || tc.batch_size < 1) throw ConfigError("fit: bad epochs/batch_size");

    Adam opt(model.parameters());
    TrainLog log;
    Rng shuffle_rng(tc.seed ^ 0x7261696e6c6f6fULL);

    auto snapshot = model.state_entries();
    std::vector<int64_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

    for (int64_t epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = lr_at(epoch, tc.initial_lr, tc.lr_decay_every);
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t elem_count = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tc.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(tc.batch_size));
            int64_t B = static_cast<int64_t>(end - start);
            std::vector<double> xb(static_cast<size_t>(B * L)), yb(static_cast<size_t>(B * L));
            for (size_t bi = start; bi < end; ++bi) {
                const auto& s = data[static_cast<size_t>(order[bi])];
                std::copy(s.input.begin(), s.input.end(), xb.begin() + static_cast<int64_t>(bi - start) * L);
                std::copy(s.target.begin(), s.target.end(), yb.begin() + static_cast<int64_t>(bi - start) * L);
            }
            Tensor x = Tensor::from_values(Shape{B, 1, L}, std::move(xb));
            Tensor y = Tensor::from_values(Shape{B, 1, L}, std::move(yb));
            Tensor pred = model.forward(x, /*training=*/true);
            Tensor loss = smooth_l1(pred, y);
            double lv = loss.item();
            if (!std::isfinite(lv)) {
                model.load_state_entries(snapshot);
                throw NumericsError("fit: non-finite loss at epoch " + std::to_string(epoch));
            }
            opt.zero_grad();
            loss.backward();
            opt.step(lr);
            loss_sum += lv * static_cast<double>(B);
            elem_count += B;
        }
        EpochLog row;
        row.epoch = epoch;
        row.lr = lr;
        row.mean_loss = loss_sum / static_cast<double>(elem_count);
        if (val_metric && tc.val_every > 0 && (epoch + 1) % tc.val_every == 0) row.val_f1 = val_metric(model);
        log.rows.push_back(row);
        if (tc.checkpoint_every > 0 && (epoch + 1) % tc.checkpoint_every == 0) {
            snapshot = model.state_entries();
            if (on_checkpoint) on_checkpoint(model, epoch);
        }
    }
    return log;
}

// Forward a single window through a frozen model and return its DT.
inline DistanceMap predict_dt(Model& model, const Window& window, int64_t cap_samples = 500) {
    if (static_cast<int64_t>(window.samples.size()) != model.config().input_length)
        throw ShapeError("predict_dt: window length vs model input_length");
    autodiff::NoGradGuard ng;
    Tensor x = Tensor::from_values(Shape{1, 1, model.config().input_length}, window.samples);
    Tensor out = model.forward(x, /*training=*/false);
    DistanceMap dt;
    dt.values = out.values();
    dt.cap_samples = cap_samples;
    dt.fs = window.fs;
    return dt;
}

// Whole-record detection: resample to the model rate if needed, slide
// model-length windows with an overlap margin, and keep each window's valleys
// only inside its core region so beats never fall on a window edge. Collisions
// across cores keep the deeper valley.
inline BeatAnnotations rpnet_detect_record(Model& model, const EcgRecord& rec, const PeakExtractionConfig& cfg = {},
                                           int64_t cap_samples = 500, double model_fs = 500.0) {
    EcgRecord work = rec;
    const bool resampled = rec.fs != model_fs;
    if (resampled) work = resample_record(rec, model_fs);
    const int64_t L = model.config().input_length;
    const int64_t n = static_cast<int64_t>(work.samples.size());
    const int64_t refractory = std::max<int64_t>(1, static_cast<int64_t>(std::llround(cfg.refractory_ms * model_fs / 1000.0)));
    const int64_t margin = std::min(std::max<int64_t>(refractory, L / 10), L / 4);
    const int64_t stride = L - 2 * margin;

    std::vector<int64_t> offsets;
    if (n <= L) {
        offsets.push_back(0);
    } else {
        for (int64_t o = 0;; o += stride) {
            if (o + L >= n) {
                offsets.push_back(n - L);
                break;
            }
            offsets.push_back(o);
        }
    }

    struct Valley {
        int64_t idx;
        double val;
    };
    std::vector<Valley> all;
    for (size_t wi = 0; wi < offsets.size(); ++wi) {
        const int64_t o = offsets[wi];
        Window w;
        w.fs = model_fs;
        w.source_fs = model_fs;
        w.offset = o;
        w.samples.assign(static_cast<size_t>(L), 0.0);
        int64_t avail = std::min<int64_t>(L, n - o);
        std::copy(work.samples.begin() + o, work.samples.begin() + o + avail, w.samples.begin());
        w.pad_samples = L - avail;
        DistanceMap dt = predict_dt(model, w, cap_samples);
        // core region: cover the full record at the ends, margins elsewhere
        int64_t core_lo = wi == 0 ? 0 : margin;
        int64_t core_hi = wi + 1 == offsets.size() ? avail : L - margin;
        for (int64_t p : peaks_from_dt(dt, cfg)) {
            if (p < core_lo || p >= core_hi) continue;
            all.push_back({o + p, dt.values[static_cast<size_t>(p)]});
        }
    }
    std::sort(all.begin(), all.end(), [](const Valley& a, const Valley& b) {
        return a.idx < b.idx || (a.idx == b.idx && a.val < b.val);
    });
    std::vector<Valley> merged;
    for (const auto& v : all) {
        if (!merged.empty() && v.idx - merged.back().idx < refractory) {
            if (v.val < merged.back().val) merged.back() = v;
        } else {
            merged.push_back(v);
        }
    }
    BeatAnnotations peaks;
    peaks.reserve(merged.size());
    for (const auto& v : merged) peaks.push_back(v.idx);
    if (resampled) peaks = rescale_annotations(peaks, model_fs, rec.fs);
    return peaks;
}

// Model DT -> valley extraction. When the window's source rate differs from
// its (model) rate, the DT is downsampled first so indices land at source
// rate. Peaks inside trailing padding are discarded.
inline BeatAnnotations predict_peaks(Model& model, const Window& window, const PeakExtractionConfig& cfg = {},
                                     int64_t cap_samples = 500) {
    DistanceMap dt = predict_dt(model, window, cap_samples);
    double out_fs = window.fs;
    if (window.source_fs > 0 && window.source_fs != window.fs) {
        dt = downsample_dt(dt, window.source_fs);
        out_fs = window.source_fs;
    }
    BeatAnnotations peaks = peaks_from_dt(dt, cfg);
    if (window.pad_samples > 0) {
        int64_t valid = static_cast<int64_t>(
            std::llround(static_cast<double>(static_cast<int64_t>(window.samples.size()) - window.pad_samples) *
                         out_fs / window.fs));
        while (!peaks.empty() && peaks.back() >= valid) peaks.pop_back();
    }
    return peaks;
}

}  // namespace rpk

#endif  // RPK_TRAIN_HPP
