// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/prompt.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

struct AggregateCell {
    std::string metric;
    double mean = 0.0;
    double std = 0.0; // population
    std::size_t n = 0;
    std::size_t excluded = 0; // undefined per-app values left out

    bool operator==(const AggregateCell&) const = default;
};

/// Mean and population standard deviation. Throws Error{EmptyList}.
AggregateCell aggregate_mean_std(std::string metric, std::span<const double> values, std::size_t excluded = 0);

/// Score bins [0,1), [1,2), ..., [9,10]; the top bin is closed.
struct Histogram {
    static constexpr std::size_t bins = 10;

    std::string condition;
    std::array<std::size_t, bins> counts{};

    [[nodiscard]] static std::array<int, bins + 1> edges();
    [[nodiscard]] std::size_t total() const;
};

/// Bin index of a score in [0, 10].
std::size_t histogram_bin(double score);
Histogram score_histogram(std::span<const double> scores, std::string condition);
Histogram score_histogram(std::span<const StructuredOutput> outputs, std::string condition);

enum class MetricGroup { Consistency, Fidelity, Semantic };

std::string_view to_string(MetricGroup group) noexcept;
MetricGroup metric_group(std::string_view metric);

/// Column order of the report: MCS, NCS, MFS(k) ascending, BLEU, METEOR, ROUGE-L.
std::vector<std::string> metric_columns(std::span<const std::size_t> ks);
std::string mfs_metric_name(std::size_t k);

struct ReportRow {
    std::string model;
    std::map<std::string, AggregateCell> cells;
    /// Set for rows compared against a baseline; nullopt values are undefined deltas.
    std::optional<std::map<std::string, std::optional<double>>> deltas;
};

struct ReportData {
    std::vector<std::size_t> ks{2, 5, 8};
    std::vector<ReportRow> rows;
    std::vector<Histogram> histograms;
    std::vector<std::string> notices;
};

/// Per-metric relative improvement of `updated` over `baseline` in percent.
std::map<std::string, std::optional<double>> report_deltas(const ReportRow& baseline, const ReportRow& updated);

/// Two decimals with an explicit sign ("+12.50%"), or "undefined".
std::string format_delta(std::optional<double> percent);

enum class ReportFormat { Markdown, Csv, Json };

/// Accepts md, markdown, csv, json. Throws Error{UnknownFormat}.
ReportFormat parse_format(std::string_view name);
std::string_view file_extension(ReportFormat format) noexcept;

/// Pure: identical inputs give identical bytes.
std::string render_report(const ReportData& data, ReportFormat format);
std::string render_histograms_csv(std::span<const Histogram> histograms);

} // namespace cama
