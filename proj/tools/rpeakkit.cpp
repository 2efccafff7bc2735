// rpeakkit command-line front end: ingest -> train -> detect -> eval, plus
// noise mixing, SNR sweeps and SVG plots.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpk/detectors.hpp"
#include "rpk/dtmap.hpp"
#include "rpk/eval.hpp"
#include "rpk/manifest.hpp"
#include "rpk/model.hpp"
#include "rpk/record_json.hpp"
#include "rpk/signal_io.hpp"
#include "rpk/svg.hpp"
#include "rpk/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rpk;

namespace {

using Clock = std::chrono::steady_clock;

struct GlobalOpts {
    uint64_t seed = 0;
    std::string out_dir;
    bool quiet = false;
};

void say(const GlobalOpts& g, const std::string& msg) {
    if (!g.quiet) std::cout << msg << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << content;
}

fs::path ensure_out_dir(const GlobalOpts& g) {
    if (g.out_dir.empty()) throw UsageError("--out is required");
    fs::path dir(g.out_dir);
    fs::create_directories(dir);
    return dir;
}

// window key used to pair predictions with references
std::string window_key(const Window& w) {
    return w.source_record_id + ":" + std::to_string(w.offset);
}

struct Dataset {
    std::vector<LabeledRecord> records;  // records mode
    std::vector<Window> windows;         // windows mode
    bool is_windows = false;
};

Dataset load_dataset(const std::string& path) {
    Dataset ds;
    fs::path p(path);
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p))
            if (e.path().extension() == ".json" && e.path().filename() != "manifest.json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto j = load_json_file(f.string());
            if (j.contains("windows")) {
                auto ws = windows_from_json(j);
                ds.windows.insert(ds.windows.end(), ws.begin(), ws.end());
                ds.is_windows = true;
            } else {
                auto [rec, peaks] = record_from_json(j);
                ds.records.push_back({std::move(rec), std::move(peaks)});
            }
        }
        if (ds.is_windows && !ds.records.empty())
            throw InputError("dataset dir mixes record and window files: " + path);
    } else {
        auto j = load_json_file(path);
        if (j.contains("windows")) {
            ds.windows = windows_from_json(j);
            ds.is_windows = true;
        } else {
            auto [rec, peaks] = record_from_json(j);
            ds.records.push_back({std::move(rec), std::move(peaks)});
        }
    }
    if (ds.records.empty() && ds.windows.empty()) throw InputError("no records found in " + path);
    return ds;
}

EcgRecord window_as_record(const Window& w) {
    EcgRecord rec;
    rec.record_id = window_key(w);
    rec.fs = w.fs;
    rec.samples = w.samples;
    if (w.pad_samples > 0) rec.samples.resize(rec.samples.size() - static_cast<size_t>(w.pad_samples));
    return rec;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    std::vector<std::string> headers;
    std::string dat_override;
    std::vector<std::string> ann_files;
    bool require_ann = false;
    int channel = 0;
    double target_fs = 500.0;
    double win_seconds = 10.0;
    bool drop_partial = false;
    int synth_count = 0;
    double synth_duration = 10.0;
    double synth_hr_lo = 50.0, synth_hr_hi = 150.0;
    double synth_jitter = 0.2;
    double synth_fs = 500.0;
    std::string noise_kind;
    double snr_db = 24.0;
};

int cmd_ingest(const GlobalOpts& g, const IngestOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    fs::create_directories(out / "records");
    std::vector<std::pair<EcgRecord, BeatAnnotations>> loaded;
    std::vector<std::string> inputs;
    int failures = 0;

    for (size_t i = 0; i < o.headers.size(); ++i) {
        const std::string& hea = o.headers[i];
        try {
            RecordMeta meta = parse_header(read_file(hea));
            if (o.channel < 0 || o.channel >= meta.n_signals)
                throw ConfigError("channel " + std::to_string(o.channel) + " out of range");
            const SignalMeta& sig = meta.signals[static_cast<size_t>(o.channel)];
            fs::path dat = o.dat_override.empty() ? fs::path(hea).parent_path() / sig.file_name
                                                  : fs::path(o.dat_override);
            auto bytes = read_bytes(dat.string());
            int64_t total = meta.n_samples * meta.n_signals;
            std::vector<int> raw = sig.format == 212 ? decode_fmt212(bytes, total) : decode_fmt16(bytes, total);
            // de-interleave the selected channel
            std::vector<int> chan;
            chan.reserve(static_cast<size_t>(meta.n_samples));
            for (int64_t s = o.channel; s < total; s += meta.n_signals) chan.push_back(raw[static_cast<size_t>(s)]);
            EcgRecord rec;
            rec.record_id = meta.record_name;
            rec.fs = meta.fs;
            rec.lead_name = sig.description.empty() ? "ch" + std::to_string(o.channel) : sig.description;
            rec.samples = adc_to_mv(chan, sig.gain, sig.baseline);
            BeatAnnotations ann;
            if (i < o.ann_files.size() && !o.ann_files[i].empty()) {
                ann = parse_annotation_csv(read_file(o.ann_files[i]));
            } else if (o.require_ann) {
                throw ConfigError("missing annotation file for " + hea + " with --require-ann");
            }
            for (int64_t a : ann)
                if (a >= static_cast<int64_t>(rec.samples.size()))
                    throw ParseError("annotation index " + std::to_string(a) + " beyond record length");
            inputs.push_back(hea);
            loaded.emplace_back(std::move(rec), std::move(ann));
        } catch (const ConfigError&) {
            throw;  // usage-class problems abort the run
        } catch (const Error& e) {
            std::cerr << "ingest: " << hea << ": " << e.what() << "\n";
            ++failures;
        }
    }

    Rng synth_rng(g.seed);
    for (int i = 0; i < o.synth_count; ++i) {
        double hr = synth_rng.uniform(o.synth_hr_lo, o.synth_hr_hi);
        double jit = synth_rng.uniform(0.0, o.synth_jitter);
        auto [rec, peaks] = synth_ecg(o.synth_fs, o.synth_duration, hr, jit, g.seed * 1000 + static_cast<uint64_t>(i));
        rec.record_id = "synth" + std::to_string(i);
        if (!o.noise_kind.empty()) {
            auto noise = gen_noise(noise_kind_from_name(o.noise_kind), static_cast<int64_t>(rec.samples.size()),
                                   rec.fs, g.seed * 7777 + static_cast<uint64_t>(i));
            rec = mix_noise(rec, noise, o.snr_db);
        }
        loaded.emplace_back(std::move(rec), std::move(peaks));
    }

    if (loaded.empty()) throw InputError("ingest: nothing to ingest (no inputs, no --synth)");

    std::vector<Window> windows;
    std::vector<std::string> outputs;
    for (auto& [rec, ann] : loaded) {
        EcgRecord work = rec;
        BeatAnnotations work_ann = ann;
        double source_fs = rec.fs;
        if (rec.fs != o.target_fs) {
            work = resample_record(rec, o.target_fs);
            work_ann = rescale_annotations(ann, rec.fs, o.target_fs);
        }
        std::string rec_path = (out / "records" / (work.record_id + ".json")).string();
        save_json_file(rec_path, record_to_json(work, work_ann));
        outputs.push_back(rec_path);
        auto ws = window_record(work, work_ann, o.win_seconds, o.drop_partial);
        for (auto& w : ws) {
            w.source_fs = source_fs;
            windows.push_back(std::move(w));
        }
    }
    std::string win_path = (out / "windows.json").string();
    save_json_file(win_path, windows_to_json(windows));
    outputs.push_back(win_path);

    RunManifest m;
    m.command = "ingest";
    m.seed = g.seed;
    m.inputs = inputs;
    m.outputs = outputs;
    m.config = {{"target_fs", o.target_fs}, {"win_seconds", o.win_seconds}, {"drop_partial", o.drop_partial},
                {"channel", o.channel},     {"synth", o.synth_count},       {"noise", o.noise_kind},
                {"snr_db", o.snr_db},       {"require_ann", o.require_ann}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    say(g, "ingest: " + std::to_string(loaded.size()) + " records, " + std::to_string(windows.size()) + " windows");
    if (failures > 0) {
        std::cerr << "ingest: " << failures << " file(s) failed to parse\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string data_path;
    int64_t epochs = 500;
    int64_t batch_size = 16;
    double initial_lr = 0.05;
    int64_t decay_every = 150;
    int64_t folds = 0;
    int64_t val_every = 0;
    int64_t cap_samples = 500;
    int64_t checkpoint_every = 0;
    // model config
    int64_t input_length = 0;  // 0 = from data
    int64_t depth = 8;
    int64_t base_channels = 16;
    int64_t max_channels = 1024;
    std::vector<int64_t> kernels = {15, 17, 19, 21};
    bool decoder_incres = false;
};

double window_set_f1(Model& model, const std::vector<Window>& ws, int64_t cap) {
    MatchResult pooled;
    for (const auto& w : ws) {
        auto mr = match_peaks(predict_peaks(model, w, {}, cap), w.peak_indices, w.fs);
        pooled.tp += mr.tp;
        pooled.fp += mr.fp;
        pooled.fn += mr.fn;
    }
    return metrics(pooled).f1;
}

int cmd_train(const GlobalOpts& g, const TrainOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto ds = load_dataset(o.data_path);
    if (!ds.is_windows) throw ConfigError("train expects a windowed dataset (windows.json from ingest)");
    auto& windows = ds.windows;

    ModelConfig cfg;
    cfg.input_length = o.input_length > 0 ? o.input_length : static_cast<int64_t>(windows.front().samples.size());
    cfg.depth = o.depth;
    cfg.base_channels = o.base_channels;
    cfg.max_channels = o.max_channels;
    cfg.inception_kernels = o.kernels;
    cfg.decoder_incres = o.decoder_incres;
    validate_config(cfg);

    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.batch_size = o.batch_size;
    tc.seed = g.seed;
    tc.initial_lr = o.initial_lr;
    tc.lr_decay_every = o.decay_every;
    tc.val_every = o.val_every;
    tc.checkpoint_every = o.checkpoint_every;

    CheckpointMeta meta;
    meta.fs = windows.front().fs;
    meta.cap_samples = o.cap_samples;

    std::vector<std::string> outputs;
    json fold_summary = json::array();

    auto train_one = [&](const std::vector<Window>& train_w, const std::vector<Window>& val_w,
                         const std::string& tag) {
        std::vector<TrainSample> samples;
        samples.reserve(train_w.size());
        for (const auto& w : train_w) samples.push_back(make_train_sample(w, o.cap_samples));
        Model model = Model::build(cfg, g.seed);
        std::string ckpt = (out / ("model" + tag + ".rpkt")).string();
        std::function<double(Model&)> val_fn;
        if (!val_w.empty())
            val_fn = [&](Model& mm) { return window_set_f1(mm, val_w, o.cap_samples); };
        auto log = fit(model, samples, tc, val_fn,
                       [&](Model& mm, int64_t) { save_model(ckpt, mm, meta); });
        save_model(ckpt, model, meta);
        std::string log_path = (out / ("train_log" + tag + ".csv")).string();
        write_file(log_path, log.to_csv());
        outputs.push_back(ckpt);
        outputs.push_back(log_path);
        double val_f1 = val_w.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : window_set_f1(model, val_w, o.cap_samples);
        if (!val_w.empty())
            say(g, "train" + tag + ": final loss " +
                       std::to_string(log.rows.empty() ? 0.0 : log.rows.back().mean_loss) + ", val F1 " +
                       std::to_string(val_f1));
        return val_f1;
    };

    if (o.folds > 1) {
        auto folds = kfold_split(static_cast<int64_t>(windows.size()), o.folds, g.seed);
        std::vector<double> fold_f1;
        for (size_t f = 0; f < folds.size(); ++f) {
            std::vector<Window> tr, va;
            for (int64_t i : folds[f].first) tr.push_back(windows[static_cast<size_t>(i)]);
            for (int64_t i : folds[f].second) va.push_back(windows[static_cast<size_t>(i)]);
            double f1 = train_one(tr, va, "_fold" + std::to_string(f));
            fold_f1.push_back(f1);
            fold_summary.push_back({{"fold", f}, {"val_f1", f1}});
        }
        double mean = 0.0;
        for (double v : fold_f1) mean += v;
        mean /= static_cast<double>(fold_f1.size());
        double var = 0.0;
        for (double v : fold_f1) var += (v - mean) * (v - mean);
        double stddev = std::sqrt(var / static_cast<double>(fold_f1.size()));
        json summary = {{"folds", fold_summary}, {"mean_val_f1", mean}, {"std_val_f1", stddev}};
        std::string sum_path = (out / "fold_summary.json").string();
        save_json_file(sum_path, summary, 2);
        outputs.push_back(sum_path);
        say(g, "train: " + std::to_string(o.folds) + "-fold val F1 " + std::to_string(mean) + " +- " +
                   std::to_string(stddev));
    } else {
        train_one(windows, {}, "");
    }

    RunManifest m;
    m.command = "train";
    m.seed = g.seed;
    m.inputs = {o.data_path};
    m.outputs = outputs;
    m.config = {{"epochs", o.epochs},       {"batch_size", o.batch_size},   {"initial_lr", o.initial_lr},
                {"decay_every", o.decay_every}, {"folds", o.folds},         {"cap_samples", o.cap_samples},
                {"model_config", model_config_to_json(cfg)}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    return 0;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

struct DetectOpts {
    std::string detector = "rpnet";
    std::string input_path;
    std::string ckpt;
    bool emit_dt = false;
    double tol_refractory_ms = 200.0;
    double valley_threshold = 0.1;
};

int cmd_detect(const GlobalOpts& g, const DetectOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto ds = load_dataset(o.input_path);

    PeakExtractionConfig pc;
    pc.valley_threshold = o.valley_threshold;
    pc.refractory_ms = o.tol_refractory_ms;

    std::optional<Model> model;
    CheckpointMeta meta;
    DetectorFn record_fn;
    if (o.detector == "rpnet") {
        if (o.ckpt.empty()) throw ConfigError("detect --detector rpnet needs --ckpt");
        auto [mm, mmeta] = load_model(o.ckpt);
        model.emplace(std::move(mm));
        meta = mmeta;
        record_fn = [&](const EcgRecord& r) { return rpnet_detect_record(*model, r, pc, meta.cap_samples, meta.fs); };
    } else {
        record_fn = make_classic_detector(o.detector);
    }

    json items = json::array();
    std::vector<std::string> outputs;
    std::ostringstream csv;
    csv << "record_id,sample_index\n";

    auto emit_item = [&](const std::string& key, double fs, const BeatAnnotations& peaks) {
        json item;
        item["record_id"] = key;
        item["fs"] = fs;
        item["peaks"] = peaks;
        items.push_back(item);
        for (int64_t p : peaks) csv << key << "," << p << "\n";
    };

    if (ds.is_windows) {
        for (const auto& w : ds.windows) {
            BeatAnnotations peaks;
            if (model) {
                if (static_cast<int64_t>(w.samples.size()) != model->config().input_length)
                    throw ConfigError("window length " + std::to_string(w.samples.size()) +
                                      " does not match checkpoint input_length " +
                                      std::to_string(model->config().input_length));
                peaks = predict_peaks(*model, w, pc, meta.cap_samples);
                if (o.emit_dt) {
                    DistanceMap dt = predict_dt(*model, w, meta.cap_samples);
                    std::ostringstream dtcsv;
                    dtcsv.precision(10);
                    for (double v : dt.values) dtcsv << v << "\n";
                    std::string dt_path =
                        (out / ("dt_" + w.source_record_id + "_" + std::to_string(w.offset) + ".csv")).string();
                    write_file(dt_path, dtcsv.str());
                    outputs.push_back(dt_path);
                }
            } else {
                peaks = record_fn(window_as_record(w));
            }
            double fs = (model && w.source_fs > 0 && w.source_fs != w.fs) ? w.source_fs : w.fs;
            emit_item(window_key(w), fs, peaks);
        }
    } else {
        for (const auto& item : ds.records) emit_item(item.record.record_id, item.record.fs, record_fn(item.record));
    }

    json out_json;
    out_json["detector"] = o.detector;
    out_json["items"] = items;
    std::string peaks_json = (out / "peaks.json").string();
    save_json_file(peaks_json, out_json);
    std::string peaks_csv = (out / "peaks.csv").string();
    write_file(peaks_csv, csv.str());
    outputs.push_back(peaks_json);
    outputs.push_back(peaks_csv);

    RunManifest m;
    m.command = "detect";
    m.seed = g.seed;
    m.inputs = {o.input_path};
    if (!o.ckpt.empty()) m.inputs.push_back(o.ckpt);
    m.outputs = outputs;
    m.config = {{"detector", o.detector}, {"emit_dt", o.emit_dt}, {"valley_threshold", o.valley_threshold},
                {"refractory_ms", o.tol_refractory_ms}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    say(g, "detect: " + std::to_string(items.size()) + " item(s) processed with " + o.detector);
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string pred_path;
    std::string ref_path;
    double tol_ms = 75.0;
    std::string dataset_name = "dataset";
    std::string snr_label;
};

int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto pred_json = load_json_file(o.pred_path);
    std::string detector = pred_json.value("detector", "unknown");

    std::map<std::string, std::pair<double, BeatAnnotations>> preds;
    for (const auto& item : pred_json.at("items"))
        preds[item.at("record_id").get<std::string>()] = {item.at("fs").get<double>(),
                                                          item.at("peaks").get<BeatAnnotations>()};

    std::map<std::string, std::pair<double, BeatAnnotations>> refs;
    auto ds = load_dataset(o.ref_path);
    if (ds.is_windows) {
        for (const auto& w : ds.windows) {
            BeatAnnotations ann = w.peak_indices;
            double fs = w.fs;
            if (w.source_fs > 0 && w.source_fs != w.fs) {
                ann = rescale_annotations(ann, w.fs, w.source_fs);
                fs = w.source_fs;
            }
            refs[window_key(w)] = {fs, ann};
        }
    } else {
        for (const auto& item : ds.records) refs[item.record.record_id] = {item.record.fs, item.peaks};
    }

    std::vector<std::string> only_pred, only_ref;
    for (const auto& [k, v] : preds)
        if (!refs.count(k)) only_pred.push_back(k);
    for (const auto& [k, v] : refs)
        if (!preds.count(k)) only_ref.push_back(k);
    if (!only_pred.empty() || !only_ref.empty()) {
        std::cerr << "eval: record-id mismatch between predictions and references\n";
        for (const auto& k : only_pred) std::cerr << "  only in predictions: " << k << "\n";
        for (const auto& k : only_ref) std::cerr << "  only in references:  " << k << "\n";
        throw ConfigError("eval: prediction/reference sets differ");
    }

    std::vector<RecordEval> evals;
    for (const auto& [key, ref] : refs) {
        const auto& pred = preds.at(key);
        RecordEval re;
        re.record_id = key;
        re.match = match_peaks(pred.second, ref.second, ref.first, o.tol_ms);
        re.report = metrics(re.match);
        evals.push_back(std::move(re));
    }
    EvalReport agg = micro_average(evals);

    std::ostringstream csv;
    csv << report_csv_header() << report_csv_row(detector, o.dataset_name, o.snr_label, agg);
    std::string csv_path = (out / "report.csv").string();
    write_file(csv_path, csv.str());

    json detail;
    detail["detector"] = detector;
    detail["dataset"] = o.dataset_name;
    detail["tol_ms"] = o.tol_ms;
    detail["aggregate"] = {{"precision", agg.precision}, {"recall", agg.recall}, {"f1", agg.f1},
                           {"tp", agg.tp},               {"fp", agg.fp},         {"fn", agg.fn}};
    detail["records"] = json::array();
    for (const auto& re : evals)
        detail["records"].push_back({{"record_id", re.record_id},
                                     {"precision", re.report.precision},
                                     {"recall", re.report.recall},
                                     {"f1", re.report.f1},
                                     {"tp", re.match.tp},
                                     {"fp", re.match.fp},
                                     {"fn", re.match.fn}});
    std::string json_path = (out / "report.json").string();
    save_json_file(json_path, detail, 2);

    RunManifest m;
    m.command = "eval";
    m.seed = g.seed;
    m.inputs = {o.pred_path, o.ref_path};
    m.outputs = {csv_path, json_path};
    m.config = {{"tol_ms", o.tol_ms}, {"dataset", o.dataset_name}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);

    std::ostringstream line;
    line.precision(6);
    line << "eval: " << detector << " P=" << agg.precision << " R=" << agg.recall << " F1=" << agg.f1;
    say(g, line.str());
    return 0;
}

// ---------------------------------------------------------------------------
// mix-noise
// ---------------------------------------------------------------------------

struct MixOpts {
    std::string input_path;
    std::string noise;  // kind name or a record JSON path
    double snr_db = 6.0;
};

int cmd_mix_noise(const GlobalOpts& g, const MixOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto ds = load_dataset(o.input_path);
    if (ds.is_windows) throw ConfigError("mix-noise operates on records, not windows");

    std::vector<double> noise_seq;
    bool noise_from_file = fs::exists(o.noise) && fs::path(o.noise).extension() == ".json";
    if (noise_from_file) {
        auto [nrec, npeaks] = record_from_json(load_json_file(o.noise));
        noise_seq = nrec.samples;
    }

    std::vector<std::string> outputs;
    size_t idx = 0;
    for (const auto& item : ds.records) {
        std::vector<double> noise = noise_seq;
        if (!noise_from_file)
            noise = gen_noise(noise_kind_from_name(o.noise), static_cast<int64_t>(item.record.samples.size()),
                              item.record.fs, g.seed + 1000 * idx);
        EcgRecord mixed = mix_noise(item.record, noise, o.snr_db);
        std::string path = (out / (mixed.record_id + "_mixed.json")).string();
        save_json_file(path, record_to_json(mixed, item.peaks));
        outputs.push_back(path);
        ++idx;
    }

    RunManifest m;
    m.command = "mix-noise";
    m.seed = g.seed;
    m.inputs = {o.input_path};
    m.outputs = outputs;
    m.config = {{"noise", o.noise}, {"snr_db", o.snr_db}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    say(g, "mix-noise: " + std::to_string(outputs.size()) + " record(s) at " + std::to_string(o.snr_db) + " dB");
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOpts {
    std::string input_path;
    std::vector<std::string> detectors = {"hamilton", "christov", "swt"};
    std::string ckpt;
    std::vector<double> levels = {24.0, 18.0, 12.0, 6.0, 0.0};
    std::string noise_kind = "muscle_artifact";
    double tol_ms = 75.0;
};

int cmd_sweep(const GlobalOpts& g, const SweepOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto ds = load_dataset(o.input_path);
    if (ds.is_windows) throw ConfigError("sweep operates on records with annotations");

    std::optional<Model> model;
    CheckpointMeta meta;
    std::vector<std::pair<std::string, DetectorFn>> dets;
    for (const auto& name : o.detectors) {
        if (name == "rpnet") {
            if (o.ckpt.empty()) throw ConfigError("sweep with rpnet needs --ckpt");
            if (!model) {
                auto [mm, mmeta] = load_model(o.ckpt);
                model.emplace(std::move(mm));
                meta = mmeta;
            }
            dets.emplace_back(name, [&](const EcgRecord& r) {
                return rpnet_detect_record(*model, r, {}, meta.cap_samples, meta.fs);
            });
        } else {
            dets.emplace_back(name, make_classic_detector(name));
        }
    }

    NoiseKind kind = noise_kind_from_name(o.noise_kind);
    std::ostringstream csv;
    csv << report_csv_header();
    std::vector<std::pair<std::string, std::vector<double>>> chart;
    json detail = json::array();
    for (const auto& [name, fn] : dets) {
        auto sweep = snr_sweep(fn, ds.records, o.levels, kind, g.seed ? g.seed : 1, o.tol_ms);
        std::vector<double> f1s;
        for (const auto& lv : sweep) {
            std::ostringstream snr;
            snr << lv.snr_db;
            csv << report_csv_row(name, fs::path(o.input_path).filename().string(), snr.str(), lv.report);
            f1s.push_back(lv.report.f1);
            detail.push_back({{"detector", name},
                              {"snr_db", lv.snr_db},
                              {"precision", lv.report.precision},
                              {"recall", lv.report.recall},
                              {"f1", lv.report.f1}});
        }
        chart.emplace_back(name, std::move(f1s));
        say(g, "sweep: finished " + name);
    }

    std::string csv_path = (out / "sweep.csv").string();
    write_file(csv_path, csv.str());
    std::string svg_path = (out / "sweep.svg").string();
    write_file(svg_path, render_line_chart_svg(o.levels, chart, "SNR (dB)", "F1"));
    std::string json_path = (out / "sweep.json").string();
    save_json_file(json_path, detail, 2);

    RunManifest m;
    m.command = "sweep";
    m.seed = g.seed;
    m.inputs = {o.input_path};
    if (!o.ckpt.empty()) m.inputs.push_back(o.ckpt);
    m.outputs = {csv_path, svg_path, json_path};
    m.config = {{"detectors", o.detectors}, {"levels", o.levels}, {"noise", o.noise_kind}, {"tol_ms", o.tol_ms}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotOpts {
    std::string windows_path;
    std::string ckpt;
    std::string peaks_path;
    std::string dt_dir;
    bool with_ref = false;
    bool overlay_dt = true;
    int64_t index = -1;  // -1 = all
};

int cmd_plot(const GlobalOpts& g, const PlotOpts& o) {
    auto t0 = Clock::now();
    fs::path out = ensure_out_dir(g);
    auto ds = load_dataset(o.windows_path);
    if (!ds.is_windows) throw ConfigError("plot expects a windowed dataset");

    std::optional<Model> model;
    CheckpointMeta meta;
    if (!o.ckpt.empty()) {
        auto [mm, mmeta] = load_model(o.ckpt);
        model.emplace(std::move(mm));
        meta = mmeta;
    }
    std::map<std::string, BeatAnnotations> peaks_by_key;
    if (!o.peaks_path.empty()) {
        auto pj = load_json_file(o.peaks_path);
        for (const auto& item : pj.at("items"))
            peaks_by_key[item.at("record_id").get<std::string>()] = item.at("peaks").get<BeatAnnotations>();
    }

    std::vector<std::string> outputs;
    for (size_t i = 0; i < ds.windows.size(); ++i) {
        if (o.index >= 0 && static_cast<int64_t>(i) != o.index) continue;
        const Window& w = ds.windows[i];
        WindowPlot plot;
        plot.ecg = w.samples;
        plot.fs = w.fs;
        plot.title = window_key(w);

        if (model) {
            plot.peaks = predict_peaks(*model, w, {}, meta.cap_samples);
            if (o.overlay_dt) plot.dt = predict_dt(*model, w, meta.cap_samples).values;
        } else if (!o.peaks_path.empty()) {
            auto it = peaks_by_key.find(window_key(w));
            if (it != peaks_by_key.end()) plot.peaks = it->second;
            if (o.overlay_dt) {
                if (o.dt_dir.empty())
                    throw ConfigError("plot: DT overlay requested but no --ckpt or --dt-dir supplies one");
                fs::path dt_file = fs::path(o.dt_dir) /
                                   ("dt_" + w.source_record_id + "_" + std::to_string(w.offset) + ".csv");
                std::istringstream is(read_file(dt_file.string()));
                std::string line;
                while (std::getline(is, line))
                    if (!line.empty()) plot.dt.push_back(std::stod(line));
            }
        } else {
            // no prediction source: visualize the reference and its DT target
            plot.peaks = w.peak_indices;
            if (o.overlay_dt)
                plot.dt = dt_from_peaks(w.peak_indices, static_cast<int64_t>(w.samples.size()), 500, w.fs).values;
        }

        if (o.with_ref) {
            plot.has_reference = true;
            auto mr = match_peaks(plot.peaks, w.peak_indices, w.fs);
            std::vector<bool> pred_used(plot.peaks.size(), false), ref_used(w.peak_indices.size(), false);
            for (auto& [pi, ri] : mr.pairs) {
                pred_used[pi] = true;
                ref_used[ri] = true;
            }
            for (size_t k = 0; k < plot.peaks.size(); ++k)
                if (!pred_used[k]) plot.fp_marks.push_back(plot.peaks[k]);
            for (size_t k = 0; k < w.peak_indices.size(); ++k)
                if (!ref_used[k]) plot.fn_marks.push_back(w.peak_indices[k]);
        }

        std::string path = (out / ("window_" + std::to_string(i) + ".svg")).string();
        write_file(path, render_window_svg(plot));
        outputs.push_back(path);
    }
    if (outputs.empty()) throw ConfigError("plot: no window matched --index");

    RunManifest m;
    m.command = "plot";
    m.seed = g.seed;
    m.inputs = {o.windows_path};
    m.outputs = outputs;
    m.config = {{"with_ref", o.with_ref}, {"overlay_dt", o.overlay_dt}, {"index", o.index}};
    m.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest((out / "manifest.json").string(), m);
    say(g, "plot: wrote " + std::to_string(outputs.size()) + " SVG(s)");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"R-peak detection toolkit: DT-regression model, classic detectors, evaluation"};
    app.set_config("--config", "", "TOML config file (flags win)");
    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed")->capture_default_str();
    app.add_option("--out", g.out_dir, "output directory");
    app.add_flag("--quiet", g.quiet, "suppress progress output");
    app.require_subcommand(1);

    IngestOpts io_;
    auto* ingest = app.add_subcommand("ingest", "parse/resample/window records into canonical JSON");
    ingest->add_option("--in", io_.headers, "header file(s)");
    ingest->add_option("--dat", io_.dat_override, "signal file override (single-record runs)");
    ingest->add_option("--ann", io_.ann_files, "annotation CSV per input, positional match");
    ingest->add_flag("--require-ann", io_.require_ann, "fail records without annotations");
    ingest->add_option("--channel", io_.channel, "signal channel index")->capture_default_str();
    ingest->add_option("--fs", io_.target_fs, "target sampling rate")->capture_default_str();
    ingest->add_option("--win-seconds", io_.win_seconds, "window length in seconds")->capture_default_str();
    ingest->add_flag("--drop-partial", io_.drop_partial, "drop the trailing partial window");
    ingest->add_option("--synth", io_.synth_count, "generate N synthetic records instead of reading files");
    ingest->add_option("--synth-duration", io_.synth_duration, "synthetic record seconds")->capture_default_str();
    ingest->add_option("--synth-hr-lo", io_.synth_hr_lo, "")->capture_default_str();
    ingest->add_option("--synth-hr-hi", io_.synth_hr_hi, "")->capture_default_str();
    ingest->add_option("--synth-jitter", io_.synth_jitter, "")->capture_default_str();
    ingest->add_option("--synth-fs", io_.synth_fs, "")->capture_default_str();
    ingest->add_option("--noise", io_.noise_kind, "mix synthetic noise kind into synthetic records");
    ingest->add_option("--snr", io_.snr_db, "SNR for --noise")->capture_default_str();

    TrainOpts to_;
    auto* train = app.add_subcommand("train", "train the DT-regression model");
    train->add_option("--data", to_.data_path, "windows.json from ingest")->required();
    train->add_option("--epochs", to_.epochs, "")->capture_default_str();
    train->add_option("--batch", to_.batch_size, "")->capture_default_str();
    train->add_option("--initial-lr", to_.initial_lr, "")->capture_default_str();
    train->add_option("--decay-every", to_.decay_every, "epochs per x0.1 LR decay")->capture_default_str();
    train->add_option("--folds", to_.folds, "run k-fold cross validation")->capture_default_str();
    train->add_option("--val-every", to_.val_every, "epochs between val F1 evaluations")->capture_default_str();
    train->add_option("--cap-samples", to_.cap_samples, "DT saturation cap")->capture_default_str();
    train->add_option("--checkpoint-every", to_.checkpoint_every, "")->capture_default_str();
    train->add_option("--input-length", to_.input_length, "0 = infer from data")->capture_default_str();
    train->add_option("--depth", to_.depth, "")->capture_default_str();
    train->add_option("--base-channels", to_.base_channels, "")->capture_default_str();
    train->add_option("--max-channels", to_.max_channels, "")->capture_default_str();
    train->add_option("--kernels", to_.kernels, "inception kernel sizes")->capture_default_str();
    train->add_flag("--decoder-incres", to_.decoder_incres, "inception-res blocks in the decoder");

    DetectOpts dopt;
    auto* detect = app.add_subcommand("detect", "run a detector over records or windows");
    detect->add_option("--detector", dopt.detector, "hamilton|christov|swt|rpnet")->capture_default_str();
    detect->add_option("--in", dopt.input_path, "records dir / record JSON / windows.json")->required();
    detect->add_option("--ckpt", dopt.ckpt, "model checkpoint (rpnet)");
    detect->add_flag("--emit-dt", dopt.emit_dt, "write the predicted DT per window (rpnet)");
    detect->add_option("--valley-threshold", dopt.valley_threshold, "")->capture_default_str();
    detect->add_option("--refractory-ms", dopt.tol_refractory_ms, "")->capture_default_str();

    EvalOpts eo;
    auto* eval = app.add_subcommand("eval", "tolerance-matched metrics");
    eval->add_option("--pred", eo.pred_path, "peaks.json from detect")->required();
    eval->add_option("--ref", eo.ref_path, "reference records dir or windows.json")->required();
    eval->add_option("--tol-ms", eo.tol_ms, "match tolerance")->capture_default_str();
    eval->add_option("--dataset-name", eo.dataset_name, "")->capture_default_str();
    eval->add_option("--snr-label", eo.snr_label, "optional snr_db column value");

    MixOpts mo;
    auto* mix = app.add_subcommand("mix-noise", "add noise at a target SNR");
    mix->add_option("--in", mo.input_path, "record JSON or records dir")->required();
    mix->add_option("--noise", mo.noise, "noise kind or noise record JSON")->required();
    mix->add_option("--snr", mo.snr_db, "target SNR in dB")->required();

    SweepOpts so;
    auto* sweep = app.add_subcommand("sweep", "SNR-graded evaluation");
    sweep->add_option("--in", so.input_path, "clean records dir")->required();
    sweep->add_option("--detectors", so.detectors, "detector list")->capture_default_str();
    sweep->add_option("--ckpt", so.ckpt, "checkpoint for rpnet");
    sweep->add_option("--levels", so.levels, "SNR levels in dB")->capture_default_str();
    sweep->add_option("--noise", so.noise_kind, "noise kind")->capture_default_str();
    sweep->add_option("--tol-ms", so.tol_ms, "")->capture_default_str();

    PlotOpts po;
    auto* plot = app.add_subcommand("plot", "render window SVGs");
    plot->add_option("--windows", po.windows_path, "windows.json")->required();
    plot->add_option("--ckpt", po.ckpt, "model checkpoint to predict DT + peaks");
    plot->add_option("--peaks", po.peaks_path, "peaks.json from detect");
    plot->add_option("--dt-dir", po.dt_dir, "directory with dt_*.csv from detect --emit-dt");
    plot->add_flag("--ref", po.with_ref, "mark FP/FN against the window references");
    plot->add_flag("!--no-dt", po.overlay_dt, "disable the DT overlay");
    plot->add_option("--index", po.index, "plot one window only")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (ingest->parsed()) return cmd_ingest(g, io_);
        if (train->parsed()) return cmd_train(g, to_);
        if (detect->parsed()) return cmd_detect(g, dopt);
        if (eval->parsed()) return cmd_eval(g, eo);
        if (mix->parsed()) return cmd_mix_noise(g, mo);
        if (sweep->parsed()) return cmd_sweep(g, so);
        if (plot->parsed()) return cmd_plot(g, po);
        throw UsageError("no subcommand");
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
