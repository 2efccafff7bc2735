#ifndef RPK_SVG_HPP
#define RPK_SVG_HPP

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "rpk/common.hpp"
#include "rpk/signal_io.hpp"

namespace rpk {

// Window plot: ECG trace in blue, DT overlay in red on a secondary [0,1]
// scale, predicted peaks in green, FP/FN markers in yellow.
struct WindowPlot {
    std::vector<double> ecg;
    std::vector<double> dt;  // empty = no overlay
    BeatAnnotations peaks;
    BeatAnnotations fp_marks;
    BeatAnnotations fn_marks;
    bool has_reference = false;
    double fs = 500.0;
    std::string title;
};

namespace svg_detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << v;
    return os.str();
}

inline std::string polyline(const std::vector<double>& ys, double x0, double x_step, double y_lo, double y_hi,
                            double v_lo, double v_hi, const std::string& id, const std::string& color) {
    std::ostringstream os;
    os << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
    double span = v_hi - v_lo;
    if (span <= 0) span = 1.0;
    for (size_t i = 0; i < ys.size(); ++i) {
        double x = x0 + x_step * static_cast<double>(i);
        double y = y_hi - (ys[i] - v_lo) / span * (y_hi - y_lo);
        os << fmt(x) << "," << fmt(y) << " ";
    }
    os << "\"/>\n";
    return os.str();
}

}  // namespace svg_detail

inline std::string render_window_svg(const WindowPlot& plot) {
    if (plot.ecg.empty()) throw InputError("render_window_svg: empty ECG");
    const double W = 1000.0, H = 340.0, ml = 10.0, mr = 10.0, mt = 28.0, mb = 12.0;
    const double x_step = (W - ml - mr) / static_cast<double>(std::max<size_t>(1, plot.ecg.size() - 1));
    double lo = *std::min_element(plot.ecg.begin(), plot.ecg.end());
    double hi = *std::max_element(plot.ecg.begin(), plot.ecg.end());
    if (hi - lo < 1e-12) {
        hi += 0.5;
        lo -= 0.5;
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<title>" << (plot.title.empty() ? "window" : plot.title) << "</title>\n";
    os << "<text x=\"12\" y=\"16\" font-size=\"12\">ecg</text>\n";
    os << svg_detail::polyline(plot.ecg, ml, x_step, mt, H - mb, lo, hi, "ecg", "#1f77b4");
    if (!plot.dt.empty()) {
        os << "<text x=\"44\" y=\"16\" font-size=\"12\">dt</text>\n";
        os << svg_detail::polyline(plot.dt, ml,
                                   (W - ml - mr) / static_cast<double>(std::max<size_t>(1, plot.dt.size() - 1)), mt,
                                   H - mb, 0.0, 1.0, "dt", "#d62728");
    }
    os << "<g id=\"peaks\" fill=\"#2ca02c\">\n";
    os << "<text x=\"68\" y=\"16\" font-size=\"12\">peaks</text>\n";
    for (int64_t p : plot.peaks) {
        if (p < 0 || p >= static_cast<int64_t>(plot.ecg.size())) continue;
        double x = ml + x_step * static_cast<double>(p);
        double y = (H - mb) - (plot.ecg[static_cast<size_t>(p)] - lo) / (hi - lo) * (H - mb - mt);
        os << "<circle cx=\"" << svg_detail::fmt(x) << "\" cy=\"" << svg_detail::fmt(y) << "\" r=\"3\"/>\n";
    }
    os << "</g>\n";
    if (plot.has_reference) {
        os << "<g id=\"fpfn\" fill=\"#e6c700\">\n";
        for (int64_t p : plot.fp_marks) {
            double x = ml + x_step * static_cast<double>(p);
            os << "<path class=\"fp\" d=\"M" << svg_detail::fmt(x - 4) << " " << svg_detail::fmt(mt + 4) << " l8 0 l-4 8 z\"/>\n";
        }
        for (int64_t p : plot.fn_marks) {
            double x = ml + x_step * static_cast<double>(p);
            os << "<path class=\"fn\" d=\"M" << svg_detail::fmt(x - 4) << " " << svg_detail::fmt(H - mb - 4)
               << " l8 0 l-4 -8 z\"/>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// F1-vs-SNR line chart for sweep reports.
inline std::string render_line_chart_svg(const std::vector<double>& xs,
                                         const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                         const std::string& x_label, const std::string& y_label) {
    if (xs.empty()) throw InputError("render_line_chart_svg: no x values");
    const double W = 640.0, H = 420.0, ml = 50.0, mr = 20.0, mt = 24.0, mb = 44.0;
    double x_lo = *std::min_element(xs.begin(), xs.end());
    double x_hi = *std::max_element(xs.begin(), xs.end());
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    const std::vector<std::string> palette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 14 " << H / 2 << ")\" "
       << "text-anchor=\"middle\">" << y_label << "</text>\n";
    // y fixed to [0, 1]
    for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double y = (H - mb) - g * (H - mt - mb);
        os << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4 << "\" font-size=\"10\" text-anchor=\"end\">"
           << svg_detail::fmt(g) << "</text>\n";
    }
    for (double x : xs) {
        double px = ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr);
        os << "<text x=\"" << px << "\" y=\"" << H - mb + 16 << "\" font-size=\"10\" text-anchor=\"middle\">"
           << svg_detail::fmt(x) << "</text>\n";
    }
    for (size_t s = 0; s < series.size(); ++s) {
        const auto& [name, ys] = series[s];
        if (ys.size() != xs.size()) throw InputError("render_line_chart_svg: series length mismatch");
        const std::string& color = palette[s % palette.size()];
        std::ostringstream pts;
        for (size_t i = 0; i < xs.size(); ++i) {
            double px = ml + (xs[i] - x_lo) / (x_hi - x_lo) * (W - ml - mr);
            double py = (H - mb) - std::clamp(ys[i], 0.0, 1.0) * (H - mt - mb);
            pts << svg_detail::fmt(px) << "," << svg_detail::fmt(py) << " ";
        }
        os << "<polyline id=\"series-" << name << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
        os << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 14 + 14 * static_cast<double>(s) << "\" font-size=\"11\" fill=\""
           << color << "\">" << name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace rpk

#endif  // RPK_SVG_HPP
