#include <catch2/catch_amalgamated.hpp>

#include "rpk/common.hpp"
#include "rpk/dtmap.hpp"

using namespace rpk;

namespace {

// brute-force min distance over all peaks, the oracle for the two-sweep version
std::vector<double> dt_brute_force(const BeatAnnotations& peaks, int64_t length, int64_t cap) {
    std::vector<double> out(static_cast<size_t>(length));
    for (int64_t i = 0; i < length; ++i) {
        int64_t best = cap;
        for (int64_t p : peaks) best = std::min(best, std::abs(i - p));
        out[static_cast<size_t>(i)] = static_cast<double>(std::min(best, cap)) / static_cast<double>(cap);
    }
    return out;
}

}  // namespace

TEST_CASE("dt_from_peaks matches the definition") {
    auto dt = dt_from_peaks({5}, 11, 500);
    for (int64_t i = 0; i < 11; ++i)
        CHECK(dt.values[static_cast<size_t>(i)] == Catch::Approx(std::abs(i - 5) / 500.0));
    CHECK(dt.values[5] == 0.0);

    auto empty = dt_from_peaks({}, 4, 500);
    CHECK(empty.values == std::vector<double>{1, 1, 1, 1});

    // expected arrays computed with the brute-force oracle below
    auto two = dt_from_peaks({2, 8}, 10, 500);
    CHECK(two.values == dt_brute_force({2, 8}, 10, 500));
    std::vector<double> expected28 = {2, 1, 0, 1, 2, 3, 2, 1, 0, 1};
    for (size_t i = 0; i < expected28.size(); ++i)
        CHECK(two.values[i] * 500.0 == Catch::Approx(expected28[i]));

    auto two9 = dt_from_peaks({2, 9}, 10, 500);
    std::vector<double> expected29 = {2, 1, 0, 1, 2, 3, 3, 2, 1, 0};
    for (size_t i = 0; i < expected29.size(); ++i)
        CHECK(two9.values[i] * 500.0 == Catch::Approx(expected29[i]));
}

TEST_CASE("dt_from_peaks input validation") {
    CHECK_THROWS_AS(dt_from_peaks({5}, 0, 500), InputError);
    CHECK_THROWS_AS(dt_from_peaks({11}, 11, 500), InputError);
    CHECK_THROWS_AS(dt_from_peaks({-1}, 11, 500), InputError);
}

TEST_CASE("dt_from_peaks equals brute force on random instances") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        int64_t length = rng.uniform_int(1, 500);
        int64_t n_peaks = rng.uniform_int(0, std::min<int64_t>(10, length));
        BeatAnnotations peaks;
        for (int64_t i = 0; i < n_peaks; ++i) peaks.push_back(rng.uniform_int(0, length - 1));
        std::sort(peaks.begin(), peaks.end());
        peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());
        int64_t cap = rng.uniform_int(1, 600);
        auto fast = dt_from_peaks(peaks, length, cap);
        auto brute = dt_brute_force(peaks, length, cap);
        REQUIRE(fast.values == brute);  // bit-exact: same integer mins, same division
    }
}

TEST_CASE("dt is Lipschitz and zero exactly at peaks") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        int64_t length = rng.uniform_int(10, 800);
        BeatAnnotations peaks;
        int64_t cur = rng.uniform_int(0, 9);
        while (cur < length) {
            peaks.push_back(cur);
            cur += rng.uniform_int(1, 200);
        }
        int64_t cap = 500;
        auto dt = dt_from_peaks(peaks, length, cap);
        for (size_t i = 1; i < dt.values.size(); ++i)
            CHECK(std::abs(dt.values[i] - dt.values[i - 1]) <= 1.0 / static_cast<double>(cap) + 1e-15);
        for (int64_t i = 0; i < length; ++i) {
            bool is_peak = std::binary_search(peaks.begin(), peaks.end(), i);
            CHECK((dt.values[static_cast<size_t>(i)] == 0.0) == is_peak);
        }
    }
}

TEST_CASE("peaks_from_dt extracts valleys") {
    CHECK(peaks_from_dt(dt_from_peaks({5}, 11, 500)) == BeatAnnotations{5});

    DistanceMap ones;
    ones.values.assign(100, 1.0);
    ones.fs = 500.0;
    CHECK(peaks_from_dt(ones).empty());

    // valleys 30 samples apart at 500 Hz = 60 ms < 200 ms refractory: merged
    auto dt = dt_from_peaks({100, 130}, 300, 500);
    CHECK(peaks_from_dt(dt) == BeatAnnotations{100});  // tie on value, earlier kept

    DistanceMap empty;
    CHECK_THROWS_AS(peaks_from_dt(empty), InputError);
}

TEST_CASE("peaks_from_dt plateau midpoint and threshold") {
    DistanceMap dt;
    dt.fs = 500.0;
    dt.cap_samples = 500;
    dt.values = {0.5, 0.02, 0.02, 0.02, 0.5, 0.4, 0.3, 0.4};
    auto peaks = peaks_from_dt(dt);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == 2);  // plateau 1..3 midpoint; 0.3 valley above threshold

    PeakExtractionConfig loose;
    loose.valley_threshold = 0.35;
    loose.refractory_ms = 4.0;  // 2 samples at 500 Hz
    auto both = peaks_from_dt(dt, loose);
    CHECK(both == BeatAnnotations{2, 6});

    // within the default 200 ms refractory the deeper valley wins
    auto merged = peaks_from_dt(dt, PeakExtractionConfig{0.35, 200.0});
    CHECK(merged == BeatAnnotations{2});
}

TEST_CASE("roundtrip property holds under the separation precondition") {
    CHECK(roundtrip_property({50, 400, 900}, 1000));
    CHECK(roundtrip_property({0}, 64));

    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        int64_t length = rng.uniform_int(400, 3000);
        BeatAnnotations peaks;
        int64_t cur = rng.uniform_int(0, 100);
        while (cur < length) {
            peaks.push_back(cur);
            cur += rng.uniform_int(150, 400);  // min gap 150 >= 100-sample refractory
        }
        if (peaks.empty()) continue;
        REQUIRE(roundtrip_property(peaks, length));
    }
}

TEST_CASE("downsample_dt rescales values and cap") {
    DistanceMap flat;
    flat.values.assign(500, 0.5);
    flat.fs = 500.0;
    flat.cap_samples = 500;
    auto down = downsample_dt(flat, 360.0);
    CHECK(down.values.size() == 360);
    for (double v : down.values) CHECK(v == Catch::Approx(0.5));
    CHECK(down.cap_samples == 360);
    CHECK(down.fs == 360.0);

    DistanceMap big;
    big.values.assign(5000, 1.0);
    big.fs = 500.0;
    CHECK(downsample_dt(big, 360.0).values.size() == 3600);

    auto v = dt_from_peaks({2500}, 5000, 500);
    auto dv = downsample_dt(v, 360.0);
    auto argmin = static_cast<int64_t>(std::min_element(dv.values.begin(), dv.values.end()) - dv.values.begin());
    CHECK(std::abs(argmin - 1800) <= 1);

    CHECK_THROWS_AS(downsample_dt(flat, 500.0), ConfigError);
    CHECK_THROWS_AS(downsample_dt(flat, 600.0), ConfigError);
}
