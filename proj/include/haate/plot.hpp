#pragma once
// Static SVG rendering of RMSE-versus-design curves: x is the design label
// rho_m, y is simulated RMSE, one polyline per rho_u, and a dashed vertical
// line marking each curve's minimum-RMSE design. No plotting dependency;
// figures are plain generated markup.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "haate/core.hpp"
#include "haate/io.hpp"
#include "haate/montecarlo.hpp"

namespace haate {

struct RmsePlotOptions {
    int width = 720;
    int height = 440;
    int margin_left = 64;
    int margin_right = 24;
    int margin_top = 36;
    int margin_bottom = 48;
};

inline std::string svg_rmse_plot(const std::vector<CellSummary>& cells, double c_value,
                                 const std::vector<double>& rho_u_values, Estimator which,
                                 const RmsePlotOptions& opt = {}) {
    auto rmse_of = [&](const CellSummary& cs) {
        return which == Estimator::linear_in_means ? cs.lm.rmse : cs.dm.rmse;
    };

    struct Curve {
        double rho_u;
        std::vector<std::pair<double, double>> points;  // (rho_m, rmse)
        double min_rho_m = 0.0;
    };
    std::vector<Curve> curves;
    double y_max = 0.0;
    for (double rho_u : rho_u_values) {
        Curve curve;
        curve.rho_u = rho_u;
        for (const auto& cell : cells) {
            if (!cell.error.empty() || cell.c != c_value || cell.rho_u != rho_u) continue;
            curve.points.emplace_back(cell.rho_m, rmse_of(cell));
        }
        if (curve.points.empty()) continue;
        std::sort(curve.points.begin(), curve.points.end());
        double best = curve.points.front().second;
        curve.min_rho_m = curve.points.front().first;
        for (const auto& [x, y] : curve.points) {
            y_max = std::max(y_max, y);
            if (y < best || (y == best && x > curve.min_rho_m)) {
                best = y;
                curve.min_rho_m = x;
            }
        }
        curves.push_back(std::move(curve));
    }
    if (curves.empty()) throw Error(Errc::empty_input, "svg_rmse_plot: no matching cells");
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.05;

    const double plot_w = opt.width - opt.margin_left - opt.margin_right;
    const double plot_h = opt.height - opt.margin_top - opt.margin_bottom;
    auto px = [&](double rho_m) { return opt.margin_left + rho_m * plot_w; };
    auto py = [&](double rmse) { return opt.margin_top + (1.0 - rmse / y_max) * plot_h; };

    static constexpr const char* palette[] = {"#1b6ca8", "#c23b22", "#2e8540",
                                              "#8031a7", "#b8860b", "#444444"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    svg << "<!-- estimator=" << estimator_name(which) << " c=" << format_double(c_value);
    for (const auto& curve : curves)
        svg << " min_rho_m[rho_u=" << format_double(curve.rho_u)
            << "]=" << format_double(curve.min_rho_m);
    svg << " -->\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(0) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
        << py(y_max / 1.05) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double xv = t / 5.0;
        svg << "<line x1=\"" << px(xv) << "\" y1=\"" << py(0) << "\" x2=\"" << px(xv) << "\" y2=\""
            << py(0) + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << px(xv) << "\" y=\"" << py(0) + 20
            << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(xv) << "</text>\n";
        const double yv = y_max / 1.05 * t / 5.0;
        svg << "<text x=\"" << px(0) - 8 << "\" y=\"" << py(yv) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(std::round(yv * 1000) / 1000)
            << "</text>\n";
    }
    svg << "<text x=\"" << px(0.5) << "\" y=\"" << opt.height - 10
        << "\" font-size=\"12\" text-anchor=\"middle\">intra-cluster correlation of treatment</text>\n";
    svg << "<text x=\"16\" y=\"" << py(y_max / 2.1)
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << py(y_max / 2.1)
        << ")\">RMSE</text>\n";
    svg << "<text x=\"" << px(0.5) << "\" y=\"" << opt.margin_top - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">"
        << (which == Estimator::linear_in_means ? "linear-in-means" : "difference-in-means")
        << " estimator, c = " << format_double(c_value) << "</text>\n";

    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& curve = curves[k];
        const char* color = palette[k % (sizeof palette / sizeof palette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (const auto& [x, y] : curve.points) svg << px(x) << ',' << py(y) << ' ';
        svg << "\"/>\n";
        // dashed marker at the minimum-RMSE design
        svg << "<line x1=\"" << px(curve.min_rho_m) << "\" y1=\"" << py(0) << "\" x2=\""
            << px(curve.min_rho_m) << "\" y2=\"" << py(y_max / 1.05) << "\" stroke=\"" << color
            << "\" stroke-dasharray=\"5,4\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << px(1) - 4 << "\" y=\"" << opt.margin_top + 16 + 16 * static_cast<int>(k)
            << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color
            << "\">rho_u = " << format_double(curve.rho_u) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// Extracts the machine-readable min_rho_m markers from an emitted SVG;
// used to cross-check the dashed lines against select_min_rmse.
inline std::vector<std::pair<double, double>> parse_min_markers(const std::string& svg) {
    std::vector<std::pair<double, double>> out;
    std::size_t pos = 0;
    const std::string key = "min_rho_m[rho_u=";
    while ((pos = svg.find(key, pos)) != std::string::npos) {
        pos += key.size();
        const std::size_t close = svg.find("]=", pos);
        const std::size_t end = svg.find_first_of(" -", close + 2);
        out.emplace_back(parse_double(svg.substr(pos, close - pos)),
                         parse_double(svg.substr(close + 2, end - close - 2)));
        pos = end;
    }
    return out;
}

}  // namespace haate
