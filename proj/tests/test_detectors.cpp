#include <catch2/catch_amalgamated.hpp>

#include "rpk/detectors.hpp"
#include "rpk/eval.hpp"

using namespace rpk;

namespace {

std::vector<LabeledRecord> clean_corpus() {
    std::vector<LabeledRecord> ds;
    int seed = 0;
    for (double hr : {55.0, 72.0, 96.0, 140.0}) {
        auto [rec, peaks] = synth_ecg(500.0, 20.0, hr, 0.15, 7000 + seed++);
        ds.push_back({std::move(rec), std::move(peaks)});
    }
    auto [rec360, peaks360] = synth_ecg(360.0, 20.0, 80.0, 0.1, 7100);
    ds.push_back({std::move(rec360), std::move(peaks360)});
    return ds;
}

}  // namespace

TEST_CASE("db4 filter pair is orthonormal with the QMF relation") {
    const auto& h = wavelet::db4_lo();
    const auto& g = wavelet::db4_hi();
    REQUIRE(h.size() == 8);
    double sum = 0.0, sumsq = 0.0, alt = 0.0;
    for (size_t k = 0; k < h.size(); ++k) {
        sum += h[k];
        sumsq += h[k] * h[k];
        alt += g[k];
    }
    CHECK(sum == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(sumsq == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(alt) < 1e-12);  // high-pass kills DC
    for (int shift = 2; shift < 8; shift += 2) {
        double dot = 0.0;
        for (size_t k = 0; k + shift < h.size(); ++k) dot += h[k] * h[k + shift];
        CHECK(std::abs(dot) < 1e-12);
    }
}

TEST_CASE("swt impulse response matches the convolution identity") {
    const int64_t N = 32;
    std::vector<double> x(N, 0.0);
    x[0] = 1.0;
    auto res = swt(x, 1);
    const auto& g = wavelet::db4_hi();
    const auto& h = wavelet::db4_lo();
    for (size_t k = 0; k < g.size(); ++k) {
        int64_t n = (N - static_cast<int64_t>(k)) % N;
        CHECK(res.details[0][static_cast<size_t>(n)] == Catch::Approx(g[k]).margin(1e-14));
        CHECK(res.approx[static_cast<size_t>(n)] == Catch::Approx(h[k]).margin(1e-14));
    }
}

TEST_CASE("swt of DC has vanishing details") {
    std::vector<double> x(100, 3.25);
    auto res = swt(x, 3);
    for (const auto& d : res.details)
        for (double v : d) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("iswt reconstructs and energy doubles per level") {
    Rng rng(12);
    std::vector<double> x(128);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    auto res = swt(x, 4);
    auto back = iswt(res);
    REQUIRE(back.size() == x.size());
    for (size_t i = 0; i < x.size(); ++i) REQUIRE(back[i] == Catch::Approx(x[i]).margin(1e-8));

    // tight frame bound 2: ||a1||^2 + ||d1||^2 == 2 ||x||^2
    auto lvl1 = swt(x, 1);
    double ex = 0.0, e1 = 0.0;
    for (double v : x) ex += v * v;
    for (double v : lvl1.approx) e1 += v * v;
    for (double v : lvl1.details[0]) e1 += v * v;
    CHECK(e1 == Catch::Approx(2.0 * ex).epsilon(1e-10));

    CHECK_THROWS_AS(swt(x, 0), ConfigError);
    CHECK_THROWS_AS(swt({}, 1), InputError);
}

TEST_CASE("swt level lookup by sampling rate") {
    CHECK(swt_level_for_fs(500.0) == 3);
    CHECK(swt_level_for_fs(360.0) == 3);
    CHECK(swt_level_for_fs(250.0) == 2);
    CHECK(swt_level_for_fs(125.0) == 1);
}

TEST_CASE("detectors return nothing on degenerate signals") {
    EcgRecord zeros;
    zeros.record_id = "z";
    zeros.fs = 500.0;
    zeros.samples.assign(5000, 0.0);
    CHECK(hamilton_detect(zeros).peaks.empty());
    CHECK(christov_detect(zeros).peaks.empty());
    CHECK(swt_detect(zeros).peaks.empty());

    EcgRecord dc = zeros;
    dc.samples.assign(5000, 2.5);  // constant; the derivative stages null it
    CHECK(christov_detect(dc).peaks.empty());
    CHECK(hamilton_detect(dc).peaks.empty());
    CHECK(swt_detect(dc).peaks.empty());
}

TEST_CASE("detectors reject too-short records") {
    EcgRecord tiny;
    tiny.fs = 500.0;
    tiny.samples.assign(500, 0.0);  // 1 s
    CHECK_THROWS_AS(hamilton_detect(tiny), InputError);
    CHECK_THROWS_AS(christov_detect(tiny), InputError);
    EcgRecord slow;
    slow.fs = 50.0;
    slow.samples.assign(500, 0.0);
    CHECK_THROWS_AS(hamilton_detect(slow), InputError);
    // swt pads short records instead of failing
    EcgRecord shorty;
    shorty.record_id = "s";
    shorty.fs = 500.0;
    shorty.samples.assign(30, 0.0);
    CHECK_NOTHROW(swt_detect(shorty));
}

TEST_CASE("detectors are deterministic, sorted, in range, refractory-clean") {
    auto ds = clean_corpus();
    for (const auto& name : classic_detector_names()) {
        auto det = make_classic_detector(name);
        for (const auto& item : ds) {
            auto p1 = det(item.record);
            auto p2 = det(item.record);
            REQUIRE(p1 == p2);
            int64_t gap = static_cast<int64_t>(0.15 * item.record.fs);
            for (size_t i = 0; i < p1.size(); ++i) {
                REQUIRE(p1[i] >= 0);
                REQUIRE(p1[i] < static_cast<int64_t>(item.record.samples.size()));
                if (i > 0) {
                    REQUIRE(p1[i] > p1[i - 1]);
                    REQUIRE(p1[i] - p1[i - 1] >= gap);
                }
            }
        }
    }
}

TEST_CASE("all detectors reach F1 >= 0.99 on the clean corpus") {
    auto ds = clean_corpus();
    for (const auto& name : classic_detector_names()) {
        auto rep = evaluate_detector(name, make_classic_detector(name), ds);
        INFO(name);
        REQUIRE(rep.aggregate.f1 >= 0.99);
    }
}

TEST_CASE("swt holds F1 >= 0.90 at 6 dB white noise") {
    auto ds = clean_corpus();
    auto sweep = snr_sweep(make_classic_detector("swt"), ds, {6.0}, NoiseKind::white, 321);
    REQUIRE(sweep.size() == 1);
    REQUIRE(sweep[0].report.f1 >= 0.90);
}

TEST_CASE("unknown detector name is rejected") {
    CHECK_THROWS_AS(make_classic_detector("pan-tompkins"), ConfigError);
    CHECK(classic_detector_names().size() == 3);
}
