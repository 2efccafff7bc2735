#include <catch2/catch_amalgamated.hpp>

#include "rpk/common.hpp"
#include "rpk/record_json.hpp"
#include "rpk/signal_io.hpp"

using namespace rpk;

TEST_CASE("parse_header reads the first line and signal lines") {
    RecordMeta m = parse_header("r1 1 500 5000\nr1.dat 212 200\n");
    CHECK(m.record_name == "r1");
    CHECK(m.n_signals == 1);
    CHECK(m.fs == 500.0);
    CHECK(m.n_samples == 5000);
    REQUIRE(m.signals.size() == 1);
    CHECK(m.signals[0].format == 212);
    CHECK(m.signals[0].gain == 200.0);

    RecordMeta m2 = parse_header("r2 2 360 650000\nr2.dat 212 200(1024)/mV\nr2.dat 212 100 512\n");
    CHECK(m2.n_signals == 2);
    CHECK(m2.fs == 360.0);
    CHECK(m2.n_samples == 650000);
    CHECK(m2.signals[0].baseline == 1024);
    CHECK(m2.signals[0].units == "mV");
    CHECK(m2.signals[1].gain == 100.0);
    CHECK(m2.signals[1].baseline == 512);
}

TEST_CASE("parse_header tolerates comments, extras and WFDB-isms") {
    RecordMeta m = parse_header("# comment\n100/2 1 360/360 650000 12:00:00\n100.dat 212 0 0 0 -22131 mystery\n");
    CHECK(m.record_name == "100");
    CHECK(m.fs == 360.0);
    CHECK(m.signals[0].gain == 200.0);  // gain 0 means default
}

TEST_CASE("parse_header error cases") {
    CHECK_THROWS_AS(parse_header("r1 1 500\n"), ParseError);
    CHECK_THROWS_AS(parse_header(""), ParseError);
    CHECK_THROWS_AS(parse_header("r1 one 500 5000\nsig.dat 212\n"), ParseError);
    CHECK_THROWS_AS(parse_header("r1 1 500 5000\nsig.dat 310 200\n"), UnsupportedFormat);
    CHECK_THROWS_AS(parse_header("r1 2 500 5000\nsig.dat 212 200\n"), ParseError);  // missing signal line
}

TEST_CASE("decode_fmt212 unpacks 12-bit pairs") {
    CHECK(decode_fmt212({0x01, 0x00, 0x02}, 2) == std::vector<int>{1, 2});
    CHECK(decode_fmt212({0xFF, 0x0F, 0x00}, 2) == std::vector<int>{-1, 0});
    CHECK(decode_fmt212({0x00, 0x80, 0x00}, 2) == std::vector<int>{0, -2048});
    CHECK(decode_fmt212({0x01, 0x00}, 1) == std::vector<int>{1});  // odd count uses ceil(1.5) bytes
    CHECK_THROWS_AS(decode_fmt212({0x01, 0x00, 0x02}, 4), ParseError);
}

TEST_CASE("encode_fmt212 inverts decode and validates range") {
    auto enc = encode_fmt212({1, 2});
    CHECK(enc.bytes == std::vector<uint8_t>{0x01, 0x00, 0x02});
    CHECK_FALSE(enc.padded);
    CHECK(encode_fmt212({0, 0}).bytes == std::vector<uint8_t>{0x00, 0x00, 0x00});
    CHECK(encode_fmt212({7}).padded);
    CHECK_THROWS_AS(encode_fmt212({3000}), RangeError);
    CHECK_THROWS_AS(encode_fmt212({-3000}), RangeError);
}

TEST_CASE("fmt212 decode-encode identity on random vectors") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = static_cast<size_t>(rng.uniform_int(1, 64));
        std::vector<int> v(n);
        for (auto& x : v) x = static_cast<int>(rng.uniform_int(-2048, 2047));
        auto enc = encode_fmt212(v);
        auto dec = decode_fmt212(enc.bytes, static_cast<int64_t>(n));
        REQUIRE(dec == v);
    }
}

TEST_CASE("decode_fmt16 sign-extends") {
    CHECK(decode_fmt16({0x01, 0x00, 0xFF, 0xFF}, 2) == std::vector<int>{1, -1});
}

TEST_CASE("adc_to_mv applies gain and baseline") {
    CHECK(adc_to_mv({200}, 200.0, 0) == std::vector<double>{1.0});
    CHECK(adc_to_mv({1024}, 200.0, 1024) == std::vector<double>{0.0});
    CHECK(adc_to_mv({1224, 824}, 200.0, 1024) == std::vector<double>{1.0, -1.0});
    CHECK_THROWS_AS(adc_to_mv({1}, 0.0, 0), ConfigError);
}

TEST_CASE("parse_annotation_csv filters, sorts, dedupes") {
    CHECK(parse_annotation_csv("100,N\n350,N\n") == BeatAnnotations{100, 350});
    CHECK(parse_annotation_csv("350,N\n100,V\n200,+\n") == BeatAnnotations{100, 350});
    CHECK(parse_annotation_csv("# c\n5,N\n5,N\n\n7,L\n") == BeatAnnotations{5, 7});
    CHECK(parse_annotation_csv("12\n3\n") == BeatAnnotations{3, 12});  // unlabeled rows kept
    CHECK_THROWS_AS(parse_annotation_csv("abc,N\n"), ParseError);
    CHECK_THROWS_AS(parse_annotation_csv("-4,N\n"), ParseError);
}

TEST_CASE("resample_linear lengths and values") {
    std::vector<double> x(3600, 0.0);
    for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.01 * static_cast<double>(i));
    CHECK(resample_linear(x, 360.0, 500.0).size() == 5000);

    std::vector<double> c = {2, 2, 2, 2};
    for (double v : resample_linear(c, 360.0, 500.0)) CHECK(v == 2.0);

    std::vector<double> ramp(10);
    for (int i = 0; i < 10; ++i) ramp[static_cast<size_t>(i)] = i;
    auto up = resample_linear(ramp, 10.0, 20.0);
    REQUIRE(up.size() == 20);
    for (int k = 0; k < 10; ++k) CHECK(up[static_cast<size_t>(2 * k)] == Catch::Approx(k));
    CHECK(up[0] == ramp[0]);

    CHECK(resample_linear(ramp, 100.0, 100.0) == ramp);  // identity at equal rates
    CHECK_THROWS_AS(resample_linear({1.0}, 10.0, 20.0), InputError);
    CHECK_THROWS_AS(resample_linear(ramp, 0.0, 20.0), ConfigError);
}

TEST_CASE("rescale_annotations rounds and drops collisions") {
    CHECK(rescale_annotations({360}, 360.0, 500.0) == BeatAnnotations{500});
    CHECK(rescale_annotations({}, 360.0, 500.0).empty());
    CHECK(rescale_annotations({100, 101}, 360.0, 180.0) == BeatAnnotations{50});
}

TEST_CASE("rescale_annotations is within half a sample of exact scaling") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        double fs_in = rng.uniform(100.0, 1000.0);
        double fs_out = rng.uniform(100.0, 1000.0);
        BeatAnnotations ann;
        int64_t cur = 0;
        for (int i = 0; i < 20; ++i) {
            cur += rng.uniform_int(1, 500);
            ann.push_back(cur);
        }
        auto mapped = rescale_annotations(ann, fs_in, fs_out);
        size_t mi = 0;
        for (int64_t a : ann) {
            double exact = static_cast<double>(a) * fs_out / fs_in;
            // every input index maps to *some* output within 0.5; collisions drop duplicates
            bool found = false;
            for (size_t j = mi; j < mapped.size(); ++j)
                if (std::abs(static_cast<double>(mapped[j]) - exact) <= 0.5 + 1e-9) {
                    found = true;
                    break;
                }
            if (!found) {
                // dropped by collision: its exact position must be within 1 of a kept neighbor
                bool near = false;
                for (int64_t m : mapped)
                    if (std::abs(static_cast<double>(m) - exact) <= 1.0) near = true;
                CHECK(near);
            }
        }
    }
}

TEST_CASE("window_record cuts aligned windows") {
    EcgRecord rec;
    rec.record_id = "w";
    rec.fs = 500.0;
    rec.samples.resize(10000);
    for (size_t i = 0; i < rec.samples.size(); ++i) rec.samples[i] = static_cast<double>(i);
    auto ws = window_record(rec, {5100}, 10.0, false);
    REQUIRE(ws.size() == 2);
    CHECK(ws[0].offset == 0);
    CHECK(ws[1].offset == 5000);
    CHECK(ws[0].peak_indices.empty());
    CHECK(ws[1].peak_indices == BeatAnnotations{100});

    rec.samples.resize(10500);
    CHECK(window_record(rec, {}, 10.0, true).size() == 2);
    auto padded = window_record(rec, {}, 10.0, false);
    REQUIRE(padded.size() == 3);
    CHECK(padded[2].pad_samples == 4500);
    CHECK(padded[2].samples.size() == 5000);
    CHECK(padded[2].samples[600] == 0.0);

    CHECK_THROWS_AS(window_record(rec, {}, 0.0101, false), ConfigError);  // non-integer L
}

TEST_CASE("windows concatenate back to the original record") {
    Rng rng(3);
    EcgRecord rec;
    rec.record_id = "cat";
    rec.fs = 100.0;
    rec.samples.resize(1234);
    for (auto& v : rec.samples) v = rng.uniform(-1.0, 1.0);
    auto ws = window_record(rec, {}, 1.0, false);
    std::vector<double> glued;
    for (const auto& w : ws)
        glued.insert(glued.end(), w.samples.begin(), w.samples.end() - w.pad_samples);
    CHECK(glued == rec.samples);
}

TEST_CASE("canonical record JSON round-trips") {
    EcgRecord rec;
    rec.record_id = "json1";
    rec.fs = 500.0;
    rec.lead_name = "II";
    rec.samples = {0.5, -0.25, 1.0};
    BeatAnnotations peaks = {1};
    auto j = record_to_json(rec, peaks);
    auto [back, back_peaks] = record_from_json(j);
    CHECK(back.record_id == rec.record_id);
    CHECK(back.fs == rec.fs);
    CHECK(back.lead_name == rec.lead_name);
    CHECK(back.samples == rec.samples);
    CHECK(back_peaks == peaks);
}
