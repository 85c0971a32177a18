// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/backend.hpp"
#include "cama/corpus.hpp"
#include "cama/fidelity.hpp"
#include "cama/rename.hpp"
#include "cama/report.hpp"
#include "cama/semantic.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

inline constexpr std::string_view version = "0.1.0";

/// A path as written in the config plus its resolved location.
struct ConfigPath {
    std::string raw;
    std::filesystem::path resolved;
};

struct MetricFlags {
    bool consistency = true;
    bool fidelity = true;
    bool semantic = true;
};

struct RunConfig {
    std::filesystem::path base_dir; // directory of the config file
    ConfigPath manifest;
    ConfigPath functions;
    std::vector<BackendConfig> backends;
    std::string annotator;             // backend whose outputs are evaluated
    std::optional<std::string> scorer; // descriptor re-scoring backend, defaults to annotator
    ConfigPath cache_dir;
    ConfigPath output_dir;
    std::optional<ConfigPath> templates_dir;
    std::vector<std::size_t> ks{2, 5, 8};
    MetricFlags metrics;
    TrainOptions training;
    BleuOptions bleu;
    std::optional<ConfigPath> synonyms;
    bool require_reference = true;
    double copy_rate_threshold = 0.5;
    RenameScope rename_scope = RenameScope::AllSites;
    CorpusOptions corpus_options;
    std::uint64_t seed = 0;
    ReportFormat format = ReportFormat::Markdown;

    [[nodiscard]] const BackendConfig& backend(const std::string& id) const;
    [[nodiscard]] const BackendConfig& annotator_backend() const { return backend(annotator); }
    [[nodiscard]] const BackendConfig& scorer_backend() const { return backend(scorer.value_or(annotator)); }
};

/// Relative paths resolve against `base_dir`. Throws Error{ConfigError}.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical form of the effective configuration; its digest identifies a run.
std::string effective_config_json(const RunConfig& config);

struct CliOverrides {
    std::optional<std::string> backend;
    std::optional<std::vector<std::size_t>> ks;
    std::optional<ReportFormat> format;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache_dir; // relative to the working directory
    std::optional<std::string> only;      // consistency | fidelity | semantic
};

/// Throws Error{ConfigError}.
void apply_overrides(RunConfig& config, const CliOverrides& overrides);

struct CommandResult {
    int exit_code = 0; // 0 ok, 1 recorded errors
    std::size_t errors = 0;
    std::vector<std::string> messages;
    std::filesystem::path manifest_path;
};

const std::vector<std::string>& command_names();

/// Runs one pipeline stage. Per-item failures are recorded in the stage
/// outputs and yield exit code 1; invalid configuration or missing inputs
/// throw before any work is done.
CommandResult run_command(std::string_view command, const RunConfig& config);

/// Directory holding one model's stage files.
std::filesystem::path model_dir(const RunConfig& config, std::string_view label);
std::string renamed_label(std::string_view backend_id);

} // namespace cama
