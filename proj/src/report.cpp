// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/report.hpp"

#include "cama/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace cama {

AggregateCell aggregate_mean_std(std::string metric, std::span<const double> values, std::size_t excluded) {
    if (values.empty()) {
        throw Error(ErrorKind::EmptyList, fmt::format("no values to aggregate for {}", metric));
    }
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {std::move(metric), mean, std::sqrt(ss / n), values.size(), excluded};
}

std::array<int, Histogram::bins + 1> Histogram::edges() {
    std::array<int, bins + 1> e{};
    for (std::size_t i = 0; i <= bins; ++i) {
        e[i] = static_cast<int>(i);
    }
    return e;
}

std::size_t Histogram::total() const {
    std::size_t t = 0;
    for (const auto c : counts) {
        t += c;
    }
    return t;
}

std::size_t histogram_bin(double score) {
    const double clamped = std::clamp(score, 0.0, 10.0);
    return std::min<std::size_t>(static_cast<std::size_t>(std::floor(clamped)), Histogram::bins - 1);
}

Histogram score_histogram(std::span<const double> scores, std::string condition) {
    Histogram h;
    h.condition = std::move(condition);
    for (const double s : scores) {
        ++h.counts[histogram_bin(s)];
    }
    return h;
}

Histogram score_histogram(std::span<const StructuredOutput> outputs, std::string condition) {
    std::vector<double> scores;
    scores.reserve(outputs.size());
    for (const auto& o : outputs) {
        scores.push_back(o.maliciousness);
    }
    return score_histogram(scores, std::move(condition));
}

std::string_view to_string(MetricGroup group) noexcept {
    switch (group) {
    case MetricGroup::Consistency:
        return "Consistency";
    case MetricGroup::Fidelity:
        return "Fidelity";
    case MetricGroup::Semantic:
        return "Semantic Relevance";
    }
    return "?";
}

MetricGroup metric_group(std::string_view metric) {
    if (metric == "MCS" || metric == "NCS") {
        return MetricGroup::Consistency;
    }
    if (metric.starts_with("MFS")) {
        return MetricGroup::Fidelity;
    }
    return MetricGroup::Semantic;
}

std::string mfs_metric_name(std::size_t k) { return fmt::format("MFS({})", k); }

std::vector<std::string> metric_columns(std::span<const std::size_t> ks) {
    std::vector<std::size_t> sorted(ks.begin(), ks.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::string> cols{"MCS", "NCS"};
    for (const auto k : sorted) {
        cols.push_back(mfs_metric_name(k));
    }
    cols.insert(cols.end(), {"BLEU", "METEOR", "ROUGE-L"});
    return cols;
}

std::map<std::string, std::optional<double>> report_deltas(const ReportRow& baseline, const ReportRow& updated) {
    std::map<std::string, std::optional<double>> out;
    for (const auto& [metric, cell] : updated.cells) {
        const auto it = baseline.cells.find(metric);
        if (it == baseline.cells.end() || it->second.mean == 0.0) {
            out.emplace(metric, std::nullopt);
            continue;
        }
        out.emplace(metric, (cell.mean - it->second.mean) / it->second.mean * 100.0);
    }
    return out;
}

std::string format_delta(std::optional<double> percent) {
    if (!percent) {
        return "undefined";
    }
    // Round first so that tiny negative noise does not print as -0.00%.
    const double rounded = std::round(*percent * 100.0) / 100.0 + 0.0;
    return fmt::format("{:+.2f}%", rounded);
}

ReportFormat parse_format(std::string_view name) {
    if (name == "md" || name == "markdown") {
        return ReportFormat::Markdown;
    }
    if (name == "csv") {
        return ReportFormat::Csv;
    }
    if (name == "json") {
        return ReportFormat::Json;
    }
    throw Error(ErrorKind::UnknownFormat, fmt::format("unknown report format '{}'", name));
}

std::string_view file_extension(ReportFormat format) noexcept {
    switch (format) {
    case ReportFormat::Markdown:
        return "md";
    case ReportFormat::Csv:
        return "csv";
    case ReportFormat::Json:
        return "json";
    }
    return "txt";
}

namespace {

std::optional<double> delta_of(const ReportRow& row, const std::string& metric) {
    if (!row.deltas) {
        return std::nullopt;
    }
    const auto it = row.deltas->find(metric);
    return it == row.deltas->end() ? std::nullopt : it->second;
}

std::string markdown_cell(const ReportRow& row, const std::string& metric) {
    const auto it = row.cells.find(metric);
    if (it == row.cells.end()) {
        return "N/A";
    }
    if (row.deltas) {
        return fmt::format("{:.3f} ({})", it->second.mean, format_delta(delta_of(row, metric)));
    }
    return fmt::format("{:.3f} ± {:.3f}", it->second.mean, it->second.std);
}

std::string render_markdown(const ReportData& data) {
    const auto cols = metric_columns(data.ks);
    std::string out;

    // Group header, then metric names as the first body row.
    out += "| Model |";
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto g = metric_group(cols[i]);
        const bool first = i == 0 || metric_group(cols[i - 1]) != g;
        out += fmt::format(" {} |", first ? to_string(g) : "");
    }
    out += "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out += "---|";
    }
    out += "\n| |";
    for (const auto& c : cols) {
        out += fmt::format(" {} |", c);
    }
    out += "\n";
    for (const auto& row : data.rows) {
        out += fmt::format("| {} |", row.model);
        for (const auto& c : cols) {
            out += fmt::format(" {} |", markdown_cell(row, c));
        }
        out += "\n";
    }

    std::vector<std::string> notes;
    for (const auto& row : data.rows) {
        for (const auto& c : cols) {
            const auto it = row.cells.find(c);
            if (it != row.cells.end() && it->second.excluded > 0) {
                notes.push_back(fmt::format("{} {}: {} app(s) excluded as undefined", row.model, c,
                                            it->second.excluded));
            }
        }
    }
    notes.insert(notes.end(), data.notices.begin(), data.notices.end());
    if (!notes.empty()) {
        out += "\n";
        for (const auto& n : notes) {
            out += fmt::format("- {}\n", n);
        }
    }

    for (const auto& h : data.histograms) {
        out += fmt::format("\nScore histogram ({}):\n\n| Bin |", h.condition);
        const auto edges = Histogram::edges();
        for (std::size_t b = 0; b < Histogram::bins; ++b) {
            out += fmt::format(" [{},{}{} |", edges[b], edges[b + 1], b + 1 == Histogram::bins ? "]" : ")");
        }
        out += "\n|---|";
        for (std::size_t b = 0; b < Histogram::bins; ++b) {
            out += "---|";
        }
        out += "\n| Count |";
        for (const auto c : h.counts) {
            out += fmt::format(" {} |", c);
        }
        out += "\n";
    }
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string render_csv(const ReportData& data) {
    const auto cols = metric_columns(data.ks);
    std::string out = "model,group,metric,mean,std,n,excluded,delta_percent\n";
    for (const auto& row : data.rows) {
        for (const auto& c : cols) {
            const auto it = row.cells.find(c);
            if (it == row.cells.end()) {
                continue;
            }
            const auto& cell = it->second;
            std::string delta;
            if (row.deltas) {
                const auto d = delta_of(row, c);
                delta = d ? fmt::format("{:.6f}", *d) : "undefined";
            }
            out += fmt::format("{},{},{},{:.6f},{:.6f},{},{},{}\n", csv_field(row.model),
                               csv_field(to_string(metric_group(c))), csv_field(c), cell.mean, cell.std, cell.n,
                               cell.excluded, delta);
        }
    }
    return out;
}

std::string render_json(const ReportData& data) {
    using ordered_json = nlohmann::ordered_json;
    const auto cols = metric_columns(data.ks);
    ordered_json cells = ordered_json::array();
    for (const auto& row : data.rows) {
        for (const auto& c : cols) {
            const auto it = row.cells.find(c);
            if (it == row.cells.end()) {
                continue;
            }
            ordered_json cell;
            cell["model"] = row.model;
            cell["group"] = to_string(metric_group(c));
            cell["metric"] = c;
            cell["mean"] = it->second.mean;
            cell["std"] = it->second.std;
            cell["n"] = it->second.n;
            cell["excluded"] = it->second.excluded;
            if (row.deltas) {
                const auto d = delta_of(row, c);
                cell["delta_percent"] = d ? ordered_json(*d) : ordered_json(nullptr);
            }
            cells.push_back(std::move(cell));
        }
    }
    ordered_json hists = ordered_json::array();
    for (const auto& h : data.histograms) {
        hists.push_back(ordered_json{{"condition", h.condition}, {"edges", Histogram::edges()}, {"counts", h.counts}});
    }
    ordered_json doc;
    doc["cells"] = std::move(cells);
    doc["histograms"] = std::move(hists);
    doc["notices"] = data.notices;
    return doc.dump(2) + "\n";
}

} // namespace

std::string render_report(const ReportData& data, ReportFormat format) {
    switch (format) {
    case ReportFormat::Markdown:
        return render_markdown(data);
    case ReportFormat::Csv:
        return render_csv(data);
    case ReportFormat::Json:
        return render_json(data);
    }
    throw Error(ErrorKind::UnknownFormat, "unknown report format");
}

std::string render_histograms_csv(std::span<const Histogram> histograms) {
    std::string out = "condition,bin_lower,bin_upper,count\n";
    const auto edges = Histogram::edges();
    for (const auto& h : histograms) {
        for (std::size_t b = 0; b < Histogram::bins; ++b) {
            out += fmt::format("{},{},{},{}\n", csv_field(h.condition), edges[b], edges[b + 1], h.counts[b]);
        }
    }
    return out;
}

} // namespace cama
