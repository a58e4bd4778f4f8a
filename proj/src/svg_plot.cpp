#include "fedsim/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 160.0;
constexpr double kMarginTop = 44.0;
constexpr double kMarginBottom = 56.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range span(const std::vector<PlotSeries>& series, bool use_x) {
    Range r{std::nan(""), std::nan("")};
    for (const auto& s : series) {
        const auto& vals = use_x ? s.x : s.y;
        for (double v : vals) {
            if (std::isnan(v)) continue;
            if (std::isnan(r.lo) || v < r.lo) r.lo = v;
            if (std::isnan(r.hi) || v > r.hi) r.hi = v;
        }
    }
    if (std::isnan(r.lo)) return {0.0, 1.0};
    if (r.hi == r.lo) {
        r.lo -= 0.5;
        r.hi += 0.5;
    }
    return r;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series) {
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");

    const Range xr = span(series, true);
    const Range yr = span(series, false);
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto sy = [&](double y) { return kMarginTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << escape_xml(title) << "</text>\n";

    // Axes.
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";

    // Ticks.
    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / ticks;
        const double fy = yr.lo + (yr.hi - yr.lo) * t / ticks;
        out << "<line x1=\"" << sx(fx) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << sx(fx)
            << "\" y2=\"" << kMarginTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << sx(fx) << "\" y=\"" << kMarginTop + plot_h + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << num(fx)
            << "</text>\n";
        out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << sy(fy) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << sy(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << num(fy)
            << "</text>\n";
    }

    out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
        << escape_xml(x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
        << kMarginTop + plot_h / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

    // Series and legend.
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];
        std::ostringstream pts;
        for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
            if (std::isnan(series[s].x[i]) || std::isnan(series[s].y[i])) continue;
            pts << sx(series[s].x[i]) << ',' << sy(series[s].y[i]) << ' ';
        }
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\""
            << pts.str() << "\"/>\n";
        const double ly = kMarginTop + 14.0 + 18.0 * static_cast<double>(s);
        out << "<line x1=\"" << kMarginLeft + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
            << kMarginLeft + plot_w + 36 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kMarginLeft + plot_w + 42 << "\" y=\"" << ly + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape_xml(series[s].label)
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace fedsim
