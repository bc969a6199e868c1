#include "lgl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace lgl {

namespace {

std::string metric_cell(double value, bool diverged) {
    return diverged ? std::string(kDivergedSentinel) : format_float(value);
}

struct CellKey {
    std::string rule;
    std::string eta;
    std::string steps;
    std::string init;
    std::string temperature;

    auto tie() const { return std::tie(rule, eta, steps, init, temperature); }
    bool operator<(const CellKey& other) const { return tie() < other.tie(); }
};

CellKey key_of(const EstimatorConfig& e) {
    return {std::string(to_string(e.rule)), format_float(e.eta), std::to_string(e.steps),
            std::string(to_string(e.init)), format_float(e.temperature)};
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments(const std::vector<double>& values) {
    Moments m;
    if (values.empty()) {
        m.mean = std::nan("");
        m.sd = std::nan("");
        return m;
    }
    for (double v : values) {
        m.mean += v;
    }
    m.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - m.mean) * (v - m.mean);
        }
        m.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

bool parse_number(const std::string& text, double& value) {
    if (text.empty()) {
        return false;
    }
    char* end = nullptr;
    value = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size() && std::isfinite(value);
}

std::string fixed(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace

std::string format_float(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

void write_run_csv(std::ostream& out, std::span<const RunRecord> records) {
    out << kCsvHeader << '\n';
    for (const RunRecord& r : records) {
        const EstimatorConfig& e = r.estimator;
        for (const EpochMetrics& m : r.epochs) {
            out << r.run_id << ',' << to_string(e.rule) << ',' << format_float(e.eta) << ',' << e.steps << ','
                << to_string(e.init) << ',' << format_float(e.temperature) << ',' << r.seed << ',' << m.epoch << ','
                << metric_cell(m.train_loss, m.diverged) << ',' << metric_cell(m.eval_loss, m.diverged) << ','
                << metric_cell(m.latent_exact, m.diverged) << ',' << metric_cell(m.latent_f1, m.diverged) << ','
                << format_float(r.wall_ms) << '\n';
        }
    }
}

void write_summary_csv(std::ostream& out, std::span<const RunRecord> records) {
    struct Cell {
        int runs = 0;
        int diverged = 0;
        std::vector<double> train;
        std::vector<double> eval;
        std::vector<double> exact;
        std::vector<double> f1;
    };
    std::map<CellKey, Cell> cells;
    for (const RunRecord& r : records) {
        Cell& cell = cells[key_of(r.estimator)];
        ++cell.runs;
        if (r.diverged || r.epochs.empty()) {
            ++cell.diverged;
            continue;
        }
        const EpochMetrics& last = r.epochs.back();
        cell.train.push_back(last.train_loss);
        cell.eval.push_back(last.eval_loss);
        cell.exact.push_back(last.latent_exact);
        cell.f1.push_back(last.latent_f1);
    }
    out << "rule,eta,steps,init,temperature,runs,diverged,"
           "train_loss_mean,train_loss_sd,eval_loss_mean,eval_loss_sd,"
           "latent_exact_mean,latent_exact_sd,latent_f1_mean,latent_f1_sd\n";
    for (const auto& [key, cell] : cells) {
        out << key.rule << ',' << key.eta << ',' << key.steps << ',' << key.init << ',' << key.temperature << ','
            << cell.runs << ',' << cell.diverged;
        for (const auto* series : {&cell.train, &cell.eval, &cell.exact, &cell.f1}) {
            const Moments m = moments(*series);
            out << ',' << format_float(m.mean) << ',' << format_float(m.sd);
        }
        out << '\n';
    }
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        std::string available;
        for (const auto& h : header) {
            available += available.empty() ? "" : ", ";
            available += h;
        }
        throw SchemaError("column '" + std::string(name) + "' not found; available columns: " + available);
    }
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("empty CSV");
    }
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto row = split(line);
        if (row.size() != table.header.size()) {
            throw SchemaError("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string render_metric_svg(const CsvTable& table, std::string_view metric) {
    const std::size_t metric_col = table.column(metric);
    const std::size_t epoch_col = table.column("epoch");
    const std::size_t rule_col = table.column("rule");
    const std::size_t eta_col = table.column("eta");
    // Optional axes of the estimator cell.
    auto optional_col = [&](std::string_view name) -> std::ptrdiff_t {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        return it == table.header.end() ? -1 : it - table.header.begin();
    };
    const std::ptrdiff_t steps_col = optional_col("steps");
    const std::ptrdiff_t init_col = optional_col("init");
    const std::ptrdiff_t temp_col = optional_col("temperature");

    struct Series {
        std::map<long, std::pair<double, int>> by_epoch; // epoch -> (sum, count)
    };
    std::map<CellKey, Series> series;
    std::map<std::string, std::vector<std::string>> distinct;
    for (const auto& row : table.rows) {
        double epoch = 0.0;
        double value = 0.0;
        if (!parse_number(row[epoch_col], epoch)) {
            throw SchemaError("non-numeric epoch '" + row[epoch_col] + "'");
        }
        CellKey key{row[rule_col], row[eta_col], steps_col >= 0 ? row[static_cast<std::size_t>(steps_col)] : "",
                    init_col >= 0 ? row[static_cast<std::size_t>(init_col)] : "",
                    temp_col >= 0 ? row[static_cast<std::size_t>(temp_col)] : ""};
        auto& s = series[key];
        if (parse_number(row[metric_col], value)) {
            auto& slot = s.by_epoch[static_cast<long>(epoch)];
            slot.first += value;
            slot.second += 1;
        }
    }
    for (const auto& [key, s] : series) {
        for (auto [name, v] : {std::pair{"steps", key.steps}, std::pair{"init", key.init},
                               std::pair{"temperature", key.temperature}}) {
            auto& seen = distinct[name];
            if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
                seen.push_back(v);
            }
        }
    }

    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
    bool any = false;
    for (const auto& [key, s] : series) {
        for (const auto& [epoch, acc] : s.by_epoch) {
            const double y = acc.first / acc.second;
            if (!any) {
                x_min = x_max = static_cast<double>(epoch);
                y_min = y_max = y;
                any = true;
            }
            x_min = std::min(x_min, static_cast<double>(epoch));
            x_max = std::max(x_max, static_cast<double>(epoch));
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (x_max <= x_min) {
        x_max = x_min + 1.0;
    }
    if (y_max <= y_min) {
        y_max = y_min + 1.0;
    }

    constexpr double width = 760.0;
    constexpr double height = 460.0;
    constexpr double left = 70.0;
    constexpr double right = 230.0;
    constexpr double top = 30.0;
    constexpr double bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << fixed(left) << "\" y=\"18\" font-size=\"14\">" << xml_escape(metric)
        << " vs epoch (mean over seeds)</text>\n";
    svg << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(plot_w)
        << "\" height=\"" << fixed(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    constexpr int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = x_min + (x_max - x_min) * i / ticks;
        const double fy = y_min + (y_max - y_min) * i / ticks;
        svg << "<line x1=\"" << fixed(px(fx)) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(px(fx))
            << "\" y2=\"" << fixed(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << fixed(top + plot_h + 20)
            << "\" text-anchor=\"middle\">" << format_float(fx) << "</text>\n";
        svg << "<line x1=\"" << fixed(left - 5) << "\" y1=\"" << fixed(py(fy)) << "\" x2=\"" << fixed(left)
            << "\" y2=\"" << fixed(py(fy)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(py(fy) + 4) << "\" text-anchor=\"end\">"
            << format_float(fy) << "</text>\n";
    }
    svg << "<text x=\"" << fixed(left + plot_w / 2) << "\" y=\"" << fixed(height - 10)
        << "\" text-anchor=\"middle\">epoch</text>\n";

    int index = 0;
    for (const auto& [key, s] : series) {
        const char* color = kPalette[index % (sizeof kPalette / sizeof kPalette[0])];
        std::string label = key.rule + " eta=" + key.eta;
        if (distinct["steps"].size() > 1) {
            label += " T=" + key.steps;
        }
        if (distinct["init"].size() > 1) {
            label += " init=" + key.init;
        }
        if (distinct["temperature"].size() > 1) {
            label += " tau=" + key.temperature;
        }
        if (!s.by_epoch.empty()) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (const auto& [epoch, acc] : s.by_epoch) {
                svg << (first ? "" : " ") << fixed(px(static_cast<double>(epoch))) << ','
                    << fixed(py(acc.first / acc.second));
                first = false;
            }
            svg << "\"/>\n";
        }
        const double ly = top + 10.0 + 18.0 * index;
        const double lx = left + plot_w + 15.0;
        svg << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 20) << "\" y2=\""
            << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fixed(lx + 26) << "\" y=\"" << fixed(ly + 4) << "\">" << xml_escape(label)
            << "</text>\n";
        ++index;
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace lgl
