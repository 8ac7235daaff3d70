#pragma once

// CSV and SVG writers. Numbers are printed with %.12g so reruns with the same
// seed produce byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "kbandit/errors.hpp"
#include "kbandit/diagnostics.hpp"
#include "kbandit/harness.hpp"

namespace kbandit {

[[nodiscard]] inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline constexpr const char* kRunCsvHeader = "run_id,t,arm,greedy_arm,epsilon,propensity,reward,inst_regret,cum_regret";

/// One row per step. greedy_arm is -1 during initialization.
inline void write_run_csv(std::ostream& out, int run_id, const RegretTrace& trace) {
    out << kRunCsvHeader << '\n';
    for (const auto& s : trace.steps) {
        out << run_id << ',' << s.t << ',' << s.chosen << ',' << s.greedy << ',' << fmt12(s.epsilon) << ',' << fmt12(s.propensity) << ','
            << fmt12(s.reward) << ',' << fmt12(s.inst_regret) << ',' << fmt12(s.cum_regret) << '\n';
    }
}

/// t, mean, stderr of the cumulative regret.
inline void write_summary_csv(std::ostream& out, const MeanCurve& curve) {
    out << "t,mean_cum_regret,stderr_cum_regret\n";
    for (std::size_t i = 0; i < curve.mean.size(); ++i) out << (i + 1) << ',' << fmt12(curve.mean[i]) << ',' << fmt12(curve.stderr_[i]) << '\n';
}

struct PlotSeries {
    std::string name;
    MeanCurve curve;
};

/// Wide plot-data table: t, then mean and stderr columns per series.
inline void write_plotdata_csv(std::ostream& out, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw InvalidInput("plotdata: no series");
    const auto len = series.front().curve.mean.size();
    out << 't';
    for (const auto& s : series) {
        if (s.curve.mean.size() != len) throw InvalidInput("plotdata: series differ in length");
        out << ',' << s.name << "_mean," << s.name << "_stderr";
    }
    out << '\n';
    for (std::size_t i = 0; i < len; ++i) {
        out << (i + 1);
        for (const auto& s : series) out << ',' << fmt12(s.curve.mean[i]) << ',' << fmt12(s.curve.stderr_[i]);
        out << '\n';
    }
}

/// Minimal SVG line chart of mean cumulative regret, one polyline per series.
inline void write_regret_svg(std::ostream& out, const std::vector<PlotSeries>& series, bool loglog = false) {
    if (series.empty()) throw InvalidInput("svg: no series");
    constexpr double width = 720, height = 480, left = 70, right = 170, top = 30, bottom = 50;
    const double pw = width - left - right, ph = height - top - bottom;
    auto tx = [&](double t) { return loglog ? std::log10(t) : t; };
    auto ty = [&](double y) { return loglog ? std::log10(std::max(y, 1e-12)) : y; };

    const auto len = series.front().curve.mean.size();
    double xmin = tx(1.0), xmax = tx(static_cast<double>(std::max<std::size_t>(len, 2)));
    double ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.curve.mean.size(); ++i) {
            if (loglog && !(s.curve.mean[i] > 0.0)) continue;
            ymin = std::min(ymin, ty(s.curve.mean[i]));
            ymax = std::max(ymax, ty(s.curve.mean[i]));
        }
    }
    if (!std::isfinite(ymin)) ymin = ymax = 0.0;
    if (!loglog) ymin = std::min(ymin, 0.0);
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double v) { return top + ph - (v - ymin) / (ymax - ymin) * ph; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt12(loglog ? std::pow(10.0, xv) : xv)
            << "</text>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt12(loglog ? std::pow(10.0, yv) : yv)
            << "</text>\n";
    }
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">t" << (loglog ? " (log)" : "") << "</text>\n";
    out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
        << ")\" text-anchor=\"middle\">cumulative regret" << (loglog ? " (log)" : "") << "</text>\n";
    const std::size_t stride = std::max<std::size_t>(1, len / 1000);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = colors[k % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        const auto& m = series[k].curve.mean;
        for (std::size_t i = 0; i < m.size(); i += stride) {
            if (loglog && !(m[i] > 0.0)) continue;
            out << fmt12(px(tx(static_cast<double>(i + 1)))) << ',' << fmt12(py(ty(m[i]))) << ' ';
        }
        out << "\"/>\n";
        const double ly = top + 16.0 * static_cast<double>(k + 1);
        out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\">" << series[k].name << "</text>\n";
    }
    out << "</svg>\n";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return f;
}

/// Diagnostic reports, one row each.
inline void write_reports_csv(std::ostream& out, const std::vector<TheoryReport>& reports) {
    out << "test,statistic,tolerance,pass,n_samples,master_seed,config_hash,detail\n";
    for (const auto& r : reports) {
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), '"', '\'');
        out << r.name << ',' << fmt12(r.statistic) << ',' << fmt12(r.tolerance) << ',' << (r.passed ? "true" : "false") << ',' << r.n_samples
            << ',' << r.master_seed << ',' << r.config_hash << ",\"" << detail << "\"\n";
    }
}

}  // namespace kbandit
