#pragma once
// Adherence 1(f >= c), informativeness, adherence tables by method and level,
// and factuality/informativeness trade-off curves as CSV and SVG.
//
// Folds run single-threaded in record order so floating-point output is
// reproducible.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fcg/core.hpp"
#include "fcg/format.hpp"
#include "fcg/verify.hpp"

namespace fcg {

// Undefined factuality (empty response) never adheres.
inline int adherence(const std::optional<double>& f, FactualityLevel level) {
    return f && *f >= level.value() ? 1 : 0;
}

inline int adherence(const FactualityScore& f, FactualityLevel level) { return adherence(f.value, level); }

// Percentage in [0, 100] at full precision; tables round with format_fixed(x, 1).
inline double adherence_rate(const std::vector<EvaluationRecord>& records, FactualityLevel level) {
    std::size_t n = 0, hits = 0;
    for (const auto& r : records) {
        if (r.failed) continue;
        ++n;
        hits += static_cast<std::size_t>(adherence(r.factuality, level));
    }
    if (n == 0) throw ValidationError("adherence_rate requires at least one evaluated record");
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

struct Informativeness {
    std::size_t count = 0;
    double per_100_words = 0.0;
    bool empty_response = false;
};

inline Informativeness informativeness(const EvaluationRecord& r) {
    Informativeness info;
    info.count = r.fact_count;
    if (r.word_count == 0) {
        info.empty_response = true;
        return info;
    }
    info.per_100_words = 100.0 * static_cast<double>(r.fact_count) / static_cast<double>(r.word_count);
    return info;
}

inline std::optional<double> relative_gain(double new_pct, double base_pct) {
    if (!(base_pct > 0.0)) return std::nullopt;
    return 100.0 * (new_pct / base_pct - 1.0);
}

// Scores one response from its labeled facts.
inline EvaluationRecord evaluate_response(std::string question_id, std::string method,
                                          std::optional<FactualityLevel> level, std::string_view text,
                                          const std::vector<AtomicFact>& labeled) {
    const auto f = factuality(labeled);
    EvaluationRecord r;
    r.question_id = std::move(question_id);
    r.method = std::move(method);
    r.level_requested = level;
    r.fact_count = f.total;
    r.supported_count = f.supported;
    r.factuality = f.value;
    r.word_count = count_words(text);
    return r;
}

// --- adherence table --------------------------------------------------------

struct AdherenceRow {
    std::string method;
    // One entry per table level; nullopt where the method has no records there.
    std::vector<std::optional<double>> rates;
};

struct AdherenceTable {
    std::vector<FactualityLevel> levels;
    std::vector<AdherenceRow> rows;
};

// A record counts toward level c when it was requested at c, or requested at
// no level (uncontrolled output judged against every c). Methods appear in
// first-seen order.
inline AdherenceTable adherence_table(const std::vector<EvaluationRecord>& records,
                                      const std::vector<FactualityLevel>& levels) {
    AdherenceTable table{levels, {}};
    std::vector<std::string> methods;
    for (const auto& r : records) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    for (const auto& m : methods) {
        AdherenceRow row{m, {}};
        for (const auto& level : levels) {
            std::vector<EvaluationRecord> subset;
            for (const auto& r : records) {
                if (r.method == m && !r.failed && (!r.level_requested || *r.level_requested == level)) subset.push_back(r);
            }
            row.rates.push_back(subset.empty() ? std::nullopt : std::optional<double>(adherence_rate(subset, level)));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Methods down, levels across, one decimal, half-up.
inline std::string render_report(const AdherenceTable& table) {
    std::size_t width = 6;
    for (const auto& row : table.rows) width = std::max(width, row.method.size());
    std::ostringstream out;
    auto pad = [](std::string s, std::size_t w, bool left) {
        if (s.size() >= w) return s;
        return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
    };
    out << pad("Method", width, true);
    for (const auto& level : table.levels) out << "  " << pad("c=" + format_number(level.value()), 7, false);
    out << '\n';
    for (const auto& row : table.rows) {
        out << pad(row.method, width, true);
        for (const auto& rate : row.rates) out << "  " << pad(rate ? format_fixed(*rate, 1) : "-", 7, false);
        out << '\n';
    }
    return out.str();
}

// --- trade-off curve ----------------------------------------------------------

struct TradeoffPoint {
    FactualityLevel level;
    double mean_factuality = 0.0;
    double mean_informativeness = 0.0;
    double adherence_rate = 0.0;
    std::size_t n = 0;
};

struct CurveOptions {
    // Facts per 100 words instead of raw fact count.
    bool length_normalized = false;
};

struct Curve {
    std::vector<TradeoffPoint> points;
    std::vector<std::string> warnings;
};

// One point per level, ascending. Records without a requested level or marked
// failed are ignored. mean_factuality averages responses with defined
// factuality (0 when there are none); informativeness averages all responses.
// Levels listed in `expected` but lacking records are omitted with a warning.
inline Curve tradeoff_curve(const std::vector<EvaluationRecord>& records,
                            const std::vector<FactualityLevel>& expected = {}, CurveOptions options = {}) {
    std::map<FactualityLevel, std::vector<const EvaluationRecord*>> groups;
    for (const auto& r : records) {
        if (!r.failed && r.level_requested) groups[*r.level_requested].push_back(&r);
    }
    Curve curve;
    for (const auto& level : expected) {
        if (!groups.count(level)) curve.warnings.push_back("no records at level " + format_number(level.value()));
    }
    for (const auto& [level, group] : groups) {
        TradeoffPoint p;
        p.level = level;
        p.n = group.size();
        double f_sum = 0.0, info_sum = 0.0;
        std::size_t f_n = 0, hits = 0;
        for (const auto* r : group) {
            if (r->factuality) {
                f_sum += *r->factuality;
                ++f_n;
            }
            const auto info = informativeness(*r);
            info_sum += options.length_normalized ? info.per_100_words : static_cast<double>(info.count);
            hits += static_cast<std::size_t>(adherence(r->factuality, level));
        }
        p.mean_factuality = f_n ? f_sum / static_cast<double>(f_n) : 0.0;
        p.mean_informativeness = info_sum / static_cast<double>(p.n);
        p.adherence_rate = 100.0 * static_cast<double>(hits) / static_cast<double>(p.n);
        curve.points.push_back(p);
    }
    return curve;
}

inline std::string curve_csv(const std::vector<TradeoffPoint>& points) {
    std::string out = "level,mean_factuality,mean_informativeness,adherence_rate,n\n";
    for (const auto& p : points) {
        out += format_number(p.level.value()) + "," + format_number(p.mean_factuality) + "," +
               format_number(p.mean_informativeness) + "," + format_number(p.adherence_rate) + "," +
               std::to_string(p.n) + "\n";
    }
    return out;
}

inline std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct CurveSeries {
    std::string name;
    std::vector<TradeoffPoint> points;
};

// Factuality on x in [0, 1], informativeness on y, one polyline per series.
inline std::string curve_svg(const std::vector<CurveSeries>& series, const std::string& y_label = "informativeness (facts)") {
    constexpr double W = 640, H = 420, left = 60, right = 150, top = 20, bottom = 50;
    const double plot_w = W - left - right, plot_h = H - top - bottom;
    double y_max = 0.0;
    for (const auto& s : series)
        for (const auto& p : s.points) y_max = std::max(y_max, p.mean_informativeness);
    y_max = y_max > 0.0 ? y_max * 1.1 : 1.0;
    auto sx = [&](double f) { return format_fixed(left + f * plot_w, 2); };
    auto sy = [&](double v) { return format_fixed(top + plot_h - v / y_max * plot_h, 2); };
    static const char* colors[] = {"#d62728", "#1f77b4", "#e6a700", "#2ca02c", "#9467bd", "#8c564b"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << " " << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 10; i += 2) {
        const double f = i / 10.0;
        svg << "<text x=\"" << sx(f) << "\" y=\"" << top + plot_h + 15 << "\" text-anchor=\"middle\">"
            << format_fixed(f, 1) << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = y_max * i / 4.0;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(v) << "\" text-anchor=\"end\">" << format_fixed(v, 1)
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">mean factuality</text>\n";
    svg << "<text transform=\"translate(16," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label)
        << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % std::size(colors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series[s].points.size(); ++i) {
            const auto& p = series[s].points[i];
            svg << (i ? " " : "") << sx(p.mean_factuality) << "," << sy(p.mean_informativeness);
        }
        svg << "\"/>\n";
        for (const auto& p : series[s].points) {
            svg << "<circle cx=\"" << sx(p.mean_factuality) << "\" cy=\"" << sy(p.mean_informativeness)
                << "\" r=\"3\" fill=\"" << color << "\"><title>c=" << format_number(p.level.value()) << "</title></circle>\n";
        }
        const double ly = top + 14 + 16.0 * static_cast<double>(s);
        svg << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + plot_w + 30
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + plot_w + 34 << "\" y=\"" << ly << "\">" << xml_escape(series[s].name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace fcg
