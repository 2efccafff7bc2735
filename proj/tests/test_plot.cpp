#include <catch2/catch_amalgamated.hpp>

#include "rpk/dtmap.hpp"
#include "rpk/eval.hpp"
#include "rpk/svg.hpp"

using namespace rpk;

TEST_CASE("window svg carries all three labeled series") {
    auto [rec, peaks] = synth_ecg(500.0, 4.0, 72.0, 0.1, 5);
    auto dt = dt_from_peaks(peaks, static_cast<int64_t>(rec.samples.size()), 500, 500.0);
    WindowPlot plot;
    plot.ecg = rec.samples;
    plot.dt = dt.values;
    plot.peaks = peaks;
    auto svg = render_window_svg(plot);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("id=\"ecg\"") != std::string::npos);
    CHECK(svg.find("id=\"dt\"") != std::string::npos);
    CHECK(svg.find("id=\"peaks\"") != std::string::npos);
    CHECK(svg.find("<circle") != std::string::npos);
    CHECK(svg.find("id=\"fpfn\"") == std::string::npos);  // no reference supplied
    CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}

TEST_CASE("reference annotations add FP/FN glyphs") {
    auto [rec, peaks] = synth_ecg(500.0, 4.0, 72.0, 0.1, 6);
    WindowPlot plot;
    plot.ecg = rec.samples;
    plot.peaks = peaks;
    plot.has_reference = true;
    plot.fp_marks = {100};
    plot.fn_marks = {900};
    auto svg = render_window_svg(plot);
    CHECK(svg.find("id=\"fpfn\"") != std::string::npos);
    CHECK(svg.find("class=\"fp\"") != std::string::npos);
    CHECK(svg.find("class=\"fn\"") != std::string::npos);
}

TEST_CASE("empty peak list renders two series without markers") {
    WindowPlot plot;
    plot.ecg.assign(100, 0.0);
    plot.ecg[50] = 1.0;
    plot.dt.assign(100, 1.0);
    auto svg = render_window_svg(plot);
    CHECK(svg.find("id=\"ecg\"") != std::string::npos);
    CHECK(svg.find("id=\"dt\"") != std::string::npos);
    CHECK(svg.find("<circle") == std::string::npos);

    WindowPlot empty;
    CHECK_THROWS_AS(render_window_svg(empty), InputError);
}

TEST_CASE("line chart renders one polyline per series") {
    std::vector<double> xs = {24, 18, 12, 6, 0};
    std::vector<std::pair<std::string, std::vector<double>>> series = {
        {"hamilton", {1.0, 1.0, 0.99, 0.92, 0.70}},
        {"rpnet", {1.0, 1.0, 1.0, 0.99, 0.87}},
    };
    auto svg = render_line_chart_svg(xs, series, "snr_db", "f1");
    CHECK(svg.find("id=\"series-hamilton\"") != std::string::npos);
    CHECK(svg.find("id=\"series-rpnet\"") != std::string::npos);
    CHECK_THROWS_AS(render_line_chart_svg({}, series, "x", "y"), InputError);
    std::vector<std::pair<std::string, std::vector<double>>> bad = {{"x", {1.0}}};
    CHECK_THROWS_AS(render_line_chart_svg(xs, bad, "x", "y"), InputError);
}
