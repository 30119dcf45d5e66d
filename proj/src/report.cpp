#include "bcatsi/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace bcatsi {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Maps data coordinates into a fixed plot box.
struct Scale {
    double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
    double left = 50.0, right = 860.0, top = 20.0, bottom = 260.0;

    double x(double v) const {
        const double d = x_hi > x_lo ? x_hi - x_lo : 1.0;
        return left + (v - x_lo) / d * (right - left);
    }
    double y(double v) const {
        const double d = y_hi > y_lo ? y_hi - y_lo : 1.0;
        return bottom - (v - y_lo) / d * (bottom - top);
    }
};

void write_overlay(const std::string& path, const PanelReportData& pd, int f,
                   const std::string& analyte) {
    const TimeSeriesPanel& p = *pd.panel;
    const int T = p.T();

    Scale sc;
    sc.x_lo = p.timestamps.front();
    sc.x_hi = p.timestamps.back();
    bool seen = false;
    auto extend = [&](double v) {
        if (!seen) {
            sc.y_lo = sc.y_hi = v;
            seen = true;
        } else {
            sc.y_lo = std::min(sc.y_lo, v);
            sc.y_hi = std::max(sc.y_hi, v);
        }
    };
    for (int t = 0; t < T; ++t) {
        extend(pd.point.at(t, f));
        if (pd.predictive != nullptr && p.obs_mask.at(t, f) == 0.0) {
            extend(pd.predictive->p5.at(t, f));
            extend(pd.predictive->p95.at(t, f));
        }
    }
    if (sc.y_hi == sc.y_lo) sc.y_hi = sc.y_lo + 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='900' height='300' "
           "viewBox='0 0 900 300'>\n";
    svg << "<rect width='900' height='300' fill='white'/>\n";
    svg << "<text x='50' y='14' font-size='12' font-family='sans-serif'>" << p.id << " / "
        << analyte << "</text>\n";

    // eval-cell markers first so everything draws on top
    for (int t = 0; t < T; ++t) {
        if (p.eval_mask.at(t, f) != 1.0) continue;
        const double x = sc.x(p.timestamps[static_cast<std::size_t>(t)]);
        svg << "<line x1='" << fmt(x) << "' y1='" << fmt(sc.top) << "' x2='" << fmt(x)
            << "' y2='" << fmt(sc.bottom)
            << "' stroke='#d62728' stroke-width='0.6' stroke-dasharray='3,3'/>\n";
    }

    // percentile band at imputed cells
    if (pd.predictive != nullptr) {
        for (int t = 0; t < T; ++t) {
            if (p.obs_mask.at(t, f) == 1.0) continue;
            const double x = sc.x(p.timestamps[static_cast<std::size_t>(t)]);
            svg << "<line x1='" << fmt(x) << "' y1='" << fmt(sc.y(pd.predictive->p5.at(t, f)))
                << "' x2='" << fmt(x) << "' y2='" << fmt(sc.y(pd.predictive->p95.at(t, f)))
                << "' stroke='#9ecae1' stroke-width='2.4' opacity='0.8'/>\n";
        }
    }

    // full imputed series as a thin line
    svg << "<polyline fill='none' stroke='#bbbbbb' stroke-width='0.8' points='";
    for (int t = 0; t < T; ++t) {
        svg << fmt(sc.x(p.timestamps[static_cast<std::size_t>(t)])) << ","
            << fmt(sc.y(pd.point.at(t, f))) << " ";
    }
    svg << "'/>\n";

    // observed points and imputed point estimates
    for (int t = 0; t < T; ++t) {
        const double x = sc.x(p.timestamps[static_cast<std::size_t>(t)]);
        if (p.obs_mask.at(t, f) == 1.0) {
            svg << "<circle cx='" << fmt(x) << "' cy='" << fmt(sc.y(p.values.at(t, f)))
                << "' r='1.4' fill='#1f77b4'/>\n";
        } else {
            svg << "<circle cx='" << fmt(x) << "' cy='" << fmt(sc.y(pd.point.at(t, f)))
                << "' r='1.6' fill='#ff7f0e'/>\n";
        }
    }

    svg << "<line x1='" << fmt(sc.left) << "' y1='" << fmt(sc.bottom) << "' x2='"
        << fmt(sc.right) << "' y2='" << fmt(sc.bottom) << "' stroke='black'/>\n";
    svg << "<line x1='" << fmt(sc.left) << "' y1='" << fmt(sc.top) << "' x2='" << fmt(sc.left)
        << "' y2='" << fmt(sc.bottom) << "' stroke='black'/>\n";
    svg << "<text x='" << fmt(sc.left) << "' y='275' font-size='10' "
           "font-family='sans-serif'>t=" << fmt(sc.x_lo) << "</text>\n";
    svg << "<text x='" << fmt(sc.right - 40) << "' y='275' font-size='10' "
           "font-family='sans-serif'>t=" << fmt(sc.x_hi) << "</text>\n";
    svg << "<text x='4' y='" << fmt(sc.y(sc.y_lo)) << "' font-size='10' "
           "font-family='sans-serif'>" << fmt(sc.y_lo) << "</text>\n";
    svg << "<text x='4' y='" << fmt(sc.y(sc.y_hi) + 8) << "' font-size='10' "
           "font-family='sans-serif'>" << fmt(sc.y_hi) << "</text>\n";
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw DataError("cannot write plot file " + path);
    out << svg.str();
}

void write_histograms(const std::string& path, const PanelReportData& pd, int f,
                      const std::string& analyte) {
    const TimeSeriesPanel& p = *pd.panel;
    std::vector<int> cells;
    for (int t = 0; t < p.T(); ++t) {
        if (p.eval_mask.at(t, f) == 1.0) cells.push_back(t);
    }
    const int max_cells = 12;
    const int n = std::min<int>(max_cells, static_cast<int>(cells.size()));
    const int cols = 4, rows = (n + cols - 1) / cols;
    const double cw = 220.0, ch = 150.0;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << cols * cw << "' height='"
        << rows * ch + 20 << "'>\n";
    svg << "<rect width='" << cols * cw << "' height='" << rows * ch + 20
        << "' fill='white'/>\n";
    svg << "<text x='6' y='14' font-size='12' font-family='sans-serif'>" << p.id << " / "
        << analyte << " (first " << n << " of " << cells.size() << " eval cells)</text>\n";

    for (int c = 0; c < n; ++c) {
        const int t = cells[static_cast<std::size_t>(c)];
        const double ox = (c % cols) * cw + 20.0;
        const double oy = (c / cols) * ch + 40.0;

        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(pd.predictive->n_samples));
        for (const Mat& s : pd.predictive->samples) samples.push_back(s.at(t, f));
        const double lo = *std::min_element(samples.begin(), samples.end());
        const double hi = *std::max_element(samples.begin(), samples.end());
        const double span = hi > lo ? hi - lo : 1.0;

        const int nbins = 10;
        std::vector<int> bins(static_cast<std::size_t>(nbins), 0);
        for (double v : samples) {
            int b = static_cast<int>((v - lo) / span * nbins);
            b = std::clamp(b, 0, nbins - 1);
            ++bins[static_cast<std::size_t>(b)];
        }
        const int peak = *std::max_element(bins.begin(), bins.end());
        const double bw = (cw - 50.0) / nbins, bh = ch - 60.0;
        for (int b = 0; b < nbins; ++b) {
            const double h = peak > 0 ? bins[static_cast<std::size_t>(b)] * bh / peak : 0.0;
            svg << "<rect x='" << fmt(ox + b * bw) << "' y='" << fmt(oy + bh - h) << "' width='"
                << fmt(bw - 1.0) << "' height='" << fmt(h) << "' fill='#1f77b4'/>\n";
        }
        auto xpos = [&](double v) { return ox + (v - lo) / span * (cw - 50.0); };
        for (double q : {0.05, 0.95}) {
            const double v = percentile(samples, q);
            svg << "<line x1='" << fmt(xpos(v)) << "' y1='" << fmt(oy) << "' x2='"
                << fmt(xpos(v)) << "' y2='" << fmt(oy + bh)
                << "' stroke='#d62728' stroke-width='1.2'/>\n";
        }
        svg << "<text x='" << fmt(ox) << "' y='" << fmt(oy + bh + 14)
            << "' font-size='9' font-family='sans-serif'>t=" << t << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw DataError("cannot write plot file " + path);
    out << svg.str();
}

} // namespace

std::string sanitize_filename(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_';
        out.push_back(ok ? c : '-');
    }
    return out;
}

std::vector<std::string> render_report(const MetricTable& metrics,
                                       std::span<const PanelReportData> panels,
                                       const std::vector<std::string>& analytes,
                                       const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    const std::string table_path = (fs::path(out_dir) / "metrics.csv").string();
    {
        std::ofstream out(table_path);
        if (!out) throw DataError("cannot write " + table_path);
        out << metric_table_csv(metrics);
    }
    written.push_back(table_path);

    for (const PanelReportData& pd : panels) {
        const TimeSeriesPanel& p = *pd.panel;
        bool any_eval = false;
        for (double v : p.eval_mask.data) any_eval = any_eval || v == 1.0;
        if (!any_eval) {
            std::cerr << "report: panel " << p.id << " has no eval cells; plots skipped\n";
            continue;
        }
        for (int f = 0; f < p.F(); ++f) {
            bool feature_eval = false;
            for (int t = 0; t < p.T(); ++t) {
                feature_eval = feature_eval || p.eval_mask.at(t, f) == 1.0;
            }
            if (!feature_eval) continue;
            const std::string base =
                sanitize_filename(p.id) + "_" + sanitize_filename(analytes[static_cast<std::size_t>(f)]);
            const std::string overlay = (fs::path(out_dir) / (base + ".svg")).string();
            write_overlay(overlay, pd, f, analytes[static_cast<std::size_t>(f)]);
            written.push_back(overlay);
            if (pd.predictive != nullptr && pd.predictive->n_samples > 1) {
                const std::string hist = (fs::path(out_dir) / (base + "_hist.svg")).string();
                write_histograms(hist, pd, f, analytes[static_cast<std::size_t>(f)]);
                written.push_back(hist);
            }
        }
    }
    return written;
}

} // namespace bcatsi
