#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lal/harness.hpp"

namespace lal {

/// Shortest round-trip decimal form, so reruns produce identical bytes.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Learning curves ------------------------------------------------------------

/// Columns: budget, mean, std, rep_0..rep_{R-1}.
inline std::string curve_csv(const LearningCurve& c) {
    std::string out = "budget,mean,std";
    for (std::size_t r = 0; r < c.traces.size(); ++r) out += ",rep_" + std::to_string(r);
    out += '\n';
    for (std::size_t b = 0; b < c.budgets.size(); ++b) {
        out += std::to_string(c.budgets[b]) + ',' + format_number(c.mean[b]) + ',' + format_number(c.std[b]);
        for (const auto& t : c.traces) out += ',' + format_number(t[b]);
        out += '\n';
    }
    return out;
}

inline nlohmann::json curve_json(const LearningCurve& c) {
    return {{"strategy", c.strategy},       {"dataset", c.dataset},   {"metric", c.metric},
            {"master_seed", c.master_seed}, {"repetitions", c.traces.size()},
            {"budgets", c.budgets},         {"mean", c.mean},         {"std", c.std},
            {"traces", c.traces}};
}

/// Inverse of curve_json; mean and std are recomputed from the traces.
inline LearningCurve curve_from_json(const nlohmann::json& j) {
    LearningCurve c;
    c.strategy = j.at("strategy").get<std::string>();
    c.dataset = j.value("dataset", "");
    c.metric = j.at("metric").get<std::string>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.budgets = j.at("budgets").get<std::vector<std::size_t>>();
    c.traces = j.at("traces").get<std::vector<std::vector<double>>>();
    for (const auto& t : c.traces)
        if (t.size() != c.budgets.size()) throw std::invalid_argument("curve: trace length differs from budgets");
    c.aggregate();
    return c;
}

// Selection traces -------------------------------------------------------------

inline std::string traces_csv(const std::vector<SelectionTrace>& traces) {
    std::string out = "repetition,iteration,index,probability\n";
    for (std::size_t r = 0; r < traces.size(); ++r)
        for (const auto& rec : traces[r])
            out += std::to_string(r) + ',' + std::to_string(rec.iteration) + ',' + std::to_string(rec.index) + ',' +
                   format_number(rec.probability) + '\n';
    return out;
}

/// Parses traces_csv output. Errors name the offending line.
inline std::vector<SelectionTrace> parse_traces_csv(const std::string& text, const std::string& source = "trace") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("repetition,iteration,index,probability", 0) != 0)
        throw std::runtime_error(source + ": line 1: expected header 'repetition,iteration,index,probability'");
    std::vector<SelectionTrace> traces;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        std::size_t rep = 0, it = 0, idx = 0;
        double p = 0.0;
        auto uint_cell = [&](const std::string& s, std::size_t& v) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            return ec == std::errc{} && ptr == s.data() + s.size();
        };
        if (cells.size() != 4 || !uint_cell(cells[0], rep) || !uint_cell(cells[1], it) || !uint_cell(cells[2], idx) ||
            !detail::parse_double(cells[3], p))
            throw std::runtime_error(source + ": line " + std::to_string(lineno) + ": malformed record '" + line + "'");
        if (rep >= traces.size()) traces.resize(rep + 1);
        traces[rep].push_back({it, idx, p});
    }
    return traces;
}

inline std::vector<SelectionTrace> load_traces_csv(const std::string& path) {
    return parse_traces_csv(read_text(path), path);
}

// Analysis outputs -----------------------------------------------------------

/// Header `p0_bin,mean_delta,count`; empty bins carry `nan`.
inline std::string motivation_csv(const MotivationResult& r) {
    std::string out = "p0_bin,mean_delta,count\n";
    for (const auto& b : r.bins)
        out += format_number(b.center) + ',' + format_number(b.mean_delta) + ',' + std::to_string(b.count) + '\n';
    return out;
}

inline std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_lower,bin_upper,count\n";
    const auto n = static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        out += format_number(static_cast<double>(b) / n) + ',' + format_number(static_cast<double>(b + 1) / n) + ',' +
               std::to_string(h.counts[b]) + '\n';
    return out;
}

inline std::string importance_csv(const std::vector<std::pair<std::string, double>>& report) {
    std::string out = "feature,importance\n";
    for (const auto& [name, v] : report) out += name + ',' + format_number(v) + '\n';
    return out;
}

// SVG plots (presentation only) --------------------------------------------

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline const char* plot_color(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;
    static constexpr double left = 60, right = 580, top = 40, bottom = 360;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
    double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

inline std::string svg_frame(const Frame& f, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    s << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    s << "<rect x=\"" << Frame::left << "\" y=\"" << Frame::top << "\" width=\"" << Frame::right - Frame::left
      << "\" height=\"" << Frame::bottom - Frame::top << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0, yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
        s << "<text x=\"" << f.px(xv) << "\" y=\"" << Frame::bottom + 16 << "\" text-anchor=\"middle\">"
          << format_number(std::round(xv * 1000) / 1000) << "</text>\n";
        s << "<text x=\"" << Frame::left - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">"
          << format_number(std::round(yv * 1000) / 1000) << "</text>\n";
    }
    s << "<text x=\"320\" y=\"400\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
    s << "<text x=\"16\" y=\"200\" text-anchor=\"middle\" transform=\"rotate(-90 16 200)\">" << xml_escape(ylabel)
      << "</text>\n";
    return s.str();
}

}  // namespace detail

inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isnan(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x0 < x1)) x0 -= 0.5, x1 += 0.5;
    if (!(y0 < y1)) y0 -= 0.5, y1 += 0.5;
    const detail::Frame f{x0, x1, y0, y1};
    std::ostringstream s;
    s << detail::svg_frame(f, title, xlabel, ylabel);
    for (std::size_t k = 0; k < series.size(); ++k) {
        s << "<polyline fill=\"none\" stroke=\"" << detail::plot_color(k) << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i)
            if (!std::isnan(series[k].y[i])) s << f.px(series[k].x[i]) << ',' << f.py(series[k].y[i]) << ' ';
        s << "\"/>\n";
        s << "<text x=\"" << detail::Frame::right - 150 << "\" y=\"" << detail::Frame::top + 16 + 16 * k
          << "\" fill=\"" << detail::plot_color(k) << "\">" << detail::xml_escape(series[k].name) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline std::string svg_histogram(const Histogram& h, const std::string& title) {
    std::size_t peak = 1;
    for (auto c : h.counts) peak = std::max(peak, c);
    const detail::Frame f{0.0, 1.0, 0.0, static_cast<double>(peak)};
    std::ostringstream s;
    s << detail::svg_frame(f, title, "p(y=0) of chosen point", "count");
    const double n = static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double xa = f.px(static_cast<double>(b) / n), xb = f.px(static_cast<double>(b + 1) / n);
        const double ya = f.py(static_cast<double>(h.counts[b]));
        s << "<rect x=\"" << xa << "\" y=\"" << ya << "\" width=\"" << xb - xa << "\" height=\""
          << detail::Frame::bottom - ya << "\" fill=\"#1f77b4\" stroke=\"white\"/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace lal
