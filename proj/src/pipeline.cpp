// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/pipeline.hpp"

#include "cama/consistency.hpp"
#include "cama/error.hpp"
#include "cama/hash.hpp"
#include "cama/passes.hpp"
#include "cama/records.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace cama {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) {
        config_error(fmt::format("{} must be an object", where));
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            config_error(fmt::format("{}: unknown key '{}'", where, key));
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return fallback;
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        config_error(fmt::format("{}: '{}' has the wrong type", where, key));
    }
}

ConfigPath resolve(const fs::path& base, std::string raw) {
    ConfigPath p;
    p.resolved = (base / raw).lexically_normal();
    p.raw = std::move(raw);
    return p;
}

ConfigPath required_path(const json& obj, const char* key, const fs::path& base, std::string_view where) {
    const auto raw = get_or<std::string>(obj, key, "", where);
    if (raw.empty()) {
        config_error(fmt::format("{}: '{}' is required", where, key));
    }
    return resolve(base, raw);
}

BackendConfig parse_backend(const json& obj, std::uint64_t run_seed) {
    check_keys(obj,
               {"id", "kind", "base_url", "model", "context_tokens", "temperature", "max_response_tokens",
                "max_retries", "parallelism", "seed", "retry_base_delay_ms", "retry_max_delay_ms", "timeout_seconds",
                "simulated_latency_ms"},
               "backend");
    BackendConfig b;
    b.backend_id = get_or<std::string>(obj, "id", "", "backend");
    const auto where = fmt::format("backend '{}'", b.backend_id);
    const auto kind = get_or<std::string>(obj, "kind", "mock", where);
    if (kind == "mock") {
        b.kind = BackendKind::Mock;
    } else if (kind == "http") {
        b.kind = BackendKind::Http;
    } else {
        config_error(fmt::format("{}: unknown kind '{}'", where, kind));
    }
    b.base_url = get_or<std::string>(obj, "base_url", "", where);
    b.model_name = get_or<std::string>(obj, "model", b.backend_id, where);
    b.context_tokens = get_or<std::size_t>(obj, "context_tokens", b.context_tokens, where);
    b.temperature = get_or<double>(obj, "temperature", b.temperature, where);
    b.max_response_tokens = get_or<std::size_t>(obj, "max_response_tokens", b.max_response_tokens, where);
    b.max_retries = get_or<int>(obj, "max_retries", b.max_retries, where);
    b.parallelism = get_or<std::size_t>(obj, "parallelism", b.parallelism, where);
    b.seed = get_or<std::uint64_t>(obj, "seed", run_seed, where);
    b.retry_base_delay_ms = get_or<int>(obj, "retry_base_delay_ms", b.retry_base_delay_ms, where);
    b.retry_max_delay_ms = get_or<int>(obj, "retry_max_delay_ms", b.retry_max_delay_ms, where);
    b.timeout_seconds = get_or<int>(obj, "timeout_seconds", b.timeout_seconds, where);
    b.simulated_latency_ms = get_or<int>(obj, "simulated_latency_ms", b.simulated_latency_ms, where);
    if (b.backend_id.find_first_of("/\\+") != std::string::npos || b.backend_id == "." || b.backend_id == "..") {
        config_error(fmt::format("{}: id may not contain '/', '\\' or '+'", where));
    }
    b.validate();
    return b;
}

} // namespace

const BackendConfig& RunConfig::backend(const std::string& id) const {
    for (const auto& b : backends) {
        if (b.backend_id == id) {
            return b;
        }
    }
    throw Error(ErrorKind::ConfigError, fmt::format("unknown backend '{}'", id));
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(fmt::format("config is not valid JSON: {}", e.what()));
    }
    check_keys(root,
               {"corpus", "backends", "annotator", "scorer", "cache_dir", "output_dir", "templates_dir", "k",
                "metrics", "fidelity", "semantic", "rename", "corpus_options", "seed", "format"},
               "config");

    RunConfig cfg;
    cfg.base_dir = fs::absolute(base_dir).lexically_normal();
    cfg.seed = get_or<std::uint64_t>(root, "seed", 0, "config");

    const auto corpus = root.value("corpus", json::object());
    check_keys(corpus, {"manifest", "functions"}, "corpus");
    cfg.manifest = required_path(corpus, "manifest", cfg.base_dir, "corpus");
    cfg.functions = required_path(corpus, "functions", cfg.base_dir, "corpus");

    const auto backends = root.value("backends", json::array());
    if (!backends.is_array() || backends.empty()) {
        config_error("config: 'backends' must be a non-empty array");
    }
    std::set<std::string> ids;
    for (const auto& b : backends) {
        cfg.backends.push_back(parse_backend(b, cfg.seed));
        const auto& id = cfg.backends.back().backend_id;
        if (!ids.insert(id).second) {
            config_error(fmt::format("config: duplicate backend id '{}'", id));
        }
    }
    cfg.annotator = get_or<std::string>(root, "annotator", cfg.backends.front().backend_id, "config");
    (void)cfg.annotator_backend();
    if (root.contains("scorer") && !root["scorer"].is_null()) {
        cfg.scorer = get_or<std::string>(root, "scorer", "", "config");
        (void)cfg.scorer_backend();
    }

    cfg.cache_dir = resolve(cfg.base_dir, get_or<std::string>(root, "cache_dir", "cache", "config"));
    cfg.output_dir = resolve(cfg.base_dir, get_or<std::string>(root, "output_dir", "out", "config"));
    if (const auto t = get_or<std::string>(root, "templates_dir", "", "config"); !t.empty()) {
        cfg.templates_dir = resolve(cfg.base_dir, t);
    }
    cfg.ks = get_or<std::vector<std::size_t>>(root, "k", cfg.ks, "config");

    const auto metrics = root.value("metrics", json::object());
    check_keys(metrics, {"consistency", "fidelity", "semantic"}, "metrics");
    cfg.metrics.consistency = get_or<bool>(metrics, "consistency", true, "metrics");
    cfg.metrics.fidelity = get_or<bool>(metrics, "fidelity", true, "metrics");
    cfg.metrics.semantic = get_or<bool>(metrics, "semantic", true, "metrics");

    const auto fidelity = root.value("fidelity", json::object());
    check_keys(fidelity, {"split_fraction", "epochs", "learning_rate", "l2", "accuracy_gate"}, "fidelity");
    auto& t = cfg.training;
    t.split_fraction = get_or<double>(fidelity, "split_fraction", t.split_fraction, "fidelity");
    t.epochs = get_or<std::size_t>(fidelity, "epochs", t.epochs, "fidelity");
    t.learning_rate = get_or<double>(fidelity, "learning_rate", t.learning_rate, "fidelity");
    t.l2 = get_or<double>(fidelity, "l2", t.l2, "fidelity");
    t.accuracy_gate = get_or<double>(fidelity, "accuracy_gate", t.accuracy_gate, "fidelity");
    if (!(t.split_fraction > 0.0 && t.split_fraction < 1.0)) {
        config_error("fidelity: split_fraction must lie in (0, 1)");
    }

    const auto semantic = root.value("semantic", json::object());
    check_keys(semantic, {"max_n", "brevity_penalty", "synonyms", "require_reference"}, "semantic");
    cfg.bleu.max_n = get_or<std::size_t>(semantic, "max_n", cfg.bleu.max_n, "semantic");
    cfg.bleu.brevity_penalty = get_or<bool>(semantic, "brevity_penalty", false, "semantic");
    cfg.require_reference = get_or<bool>(semantic, "require_reference", true, "semantic");
    if (const auto s = get_or<std::string>(semantic, "synonyms", "", "semantic"); !s.empty()) {
        cfg.synonyms = resolve(cfg.base_dir, s);
    }
    if (cfg.bleu.max_n == 0) {
        config_error("semantic: max_n must be positive");
    }

    const auto rename = root.value("rename", json::object());
    check_keys(rename, {"copy_rate_threshold", "scope"}, "rename");
    cfg.copy_rate_threshold = get_or<double>(rename, "copy_rate_threshold", 0.5, "rename");
    const auto scope = get_or<std::string>(rename, "scope", "all-sites", "rename");
    if (scope == "all-sites") {
        cfg.rename_scope = RenameScope::AllSites;
    } else if (scope == "definitions-only") {
        cfg.rename_scope = RenameScope::DefinitionsOnly;
    } else {
        config_error(fmt::format("rename: unknown scope '{}'", scope));
    }

    const auto copts = root.value("corpus_options", json::object());
    check_keys(copts, {"chars_per_token", "size_bucket_bytes"}, "corpus_options");
    cfg.corpus_options.chars_per_token = get_or<std::size_t>(copts, "chars_per_token", 4, "corpus_options");
    cfg.corpus_options.size_bucket_bytes = get_or<std::uint64_t>(copts, "size_bucket_bytes", 0, "corpus_options");
    if (cfg.corpus_options.chars_per_token == 0) {
        config_error("corpus_options: chars_per_token must be positive");
    }

    try {
        cfg.format = parse_format(get_or<std::string>(root, "format", "md", "config"));
    } catch (const Error& e) {
        config_error(e.what());
    }

    if (cfg.ks.empty() || std::find(cfg.ks.begin(), cfg.ks.end(), 0U) != cfg.ks.end()) {
        config_error("config: k values must be positive and non-empty");
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        config_error(fmt::format("cannot read config: {}", e.what()));
    }
    return parse_run_config(text, fs::absolute(path).parent_path());
}

namespace {

ordered_json backend_json(const BackendConfig& b) {
    ordered_json j;
    j["id"] = b.backend_id;
    j["kind"] = b.kind == BackendKind::Mock ? "mock" : "http";
    j["base_url"] = b.base_url;
    j["model"] = b.model_name;
    j["context_tokens"] = b.context_tokens;
    j["temperature"] = b.temperature;
    j["max_response_tokens"] = b.max_response_tokens;
    j["max_retries"] = b.max_retries;
    j["parallelism"] = b.parallelism;
    j["seed"] = b.seed;
    j["retry_base_delay_ms"] = b.retry_base_delay_ms;
    j["retry_max_delay_ms"] = b.retry_max_delay_ms;
    j["timeout_seconds"] = b.timeout_seconds;
    j["simulated_latency_ms"] = b.simulated_latency_ms;
    return j;
}

} // namespace

std::string effective_config_json(const RunConfig& cfg) {
    ordered_json j;
    j["corpus"] = {{"manifest", cfg.manifest.raw}, {"functions", cfg.functions.raw}};
    ordered_json backends = ordered_json::array();
    for (const auto& b : cfg.backends) {
        backends.push_back(backend_json(b));
    }
    j["backends"] = std::move(backends);
    j["annotator"] = cfg.annotator;
    j["scorer"] = cfg.scorer ? ordered_json(*cfg.scorer) : ordered_json(nullptr);
    j["cache_dir"] = cfg.cache_dir.raw;
    j["output_dir"] = cfg.output_dir.raw;
    j["templates_dir"] = cfg.templates_dir ? ordered_json(cfg.templates_dir->raw) : ordered_json(nullptr);
    j["k"] = cfg.ks;
    j["metrics"] = {{"consistency", cfg.metrics.consistency},
                    {"fidelity", cfg.metrics.fidelity},
                    {"semantic", cfg.metrics.semantic}};
    j["fidelity"] = {{"split_fraction", cfg.training.split_fraction},
                     {"epochs", cfg.training.epochs},
                     {"learning_rate", cfg.training.learning_rate},
                     {"l2", cfg.training.l2},
                     {"accuracy_gate", cfg.training.accuracy_gate}};
    j["semantic"] = {{"max_n", cfg.bleu.max_n},
                     {"brevity_penalty", cfg.bleu.brevity_penalty},
                     {"synonyms", cfg.synonyms ? ordered_json(cfg.synonyms->raw) : ordered_json(nullptr)},
                     {"require_reference", cfg.require_reference}};
    j["rename"] = {{"copy_rate_threshold", cfg.copy_rate_threshold},
                   {"scope", cfg.rename_scope == RenameScope::AllSites ? "all-sites" : "definitions-only"}};
    j["corpus_options"] = {{"chars_per_token", cfg.corpus_options.chars_per_token},
                           {"size_bucket_bytes", cfg.corpus_options.size_bucket_bytes}};
    j["seed"] = cfg.seed;
    j["format"] = file_extension(cfg.format);
    return j.dump(2) + "\n";
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
    if (o.backend) {
        (void)cfg.backend(*o.backend);
        cfg.annotator = *o.backend;
    }
    if (o.ks) {
        if (o.ks->empty() || std::find(o.ks->begin(), o.ks->end(), 0U) != o.ks->end()) {
            config_error("--k values must be positive");
        }
        cfg.ks = *o.ks;
    }
    if (o.format) {
        cfg.format = *o.format;
    }
    if (o.seed) {
        // Backends without an explicit seed follow the run seed.
        const auto old = cfg.seed;
        cfg.seed = *o.seed;
        for (auto& b : cfg.backends) {
            if (b.seed == old) {
                b.seed = *o.seed;
            }
        }
    }
    if (o.cache_dir) {
        cfg.cache_dir.raw = *o.cache_dir;
        cfg.cache_dir.resolved = fs::absolute(*o.cache_dir).lexically_normal();
    }
    if (o.only) {
        cfg.metrics = MetricFlags{false, false, false};
        if (*o.only == "consistency") {
            cfg.metrics.consistency = true;
        } else if (*o.only == "fidelity") {
            cfg.metrics.fidelity = true;
        } else if (*o.only == "semantic") {
            cfg.metrics.semantic = true;
        } else {
            config_error(fmt::format("--only expects consistency, fidelity or semantic, got '{}'", *o.only));
        }
    }
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"ingest",       "dedupe",  "annotate",          "score-descriptors",
                                                "regen-names",  "describe-apps", "metrics", "rename-experiment",
                                                "report"};
    return names;
}

std::string renamed_label(std::string_view backend_id) { return std::string(backend_id) + "+"; }

fs::path model_dir(const RunConfig& cfg, std::string_view label) { return cfg.output_dir.resolved / label; }

namespace {

std::string relative_to(const RunConfig& cfg, const fs::path& p) {
    const auto r = p.lexically_relative(cfg.base_dir);
    return r.empty() ? p.generic_string() : r.generic_string();
}

// Collects what a command read and wrote; written next to its outputs.
class RunManifest {
  public:
    RunManifest(const RunConfig& cfg, std::string command, std::string model)
        : cfg_(cfg), command_(std::move(command)), model_(std::move(model)) {}

    void input(const fs::path& path, const std::string& content) {
        inputs_.push_back({relative_to(cfg_, path), sha256_hex(content)});
    }

    void emit(const fs::path& path, const std::string& content) {
        write_file_atomic(path, content);
        outputs_.push_back({relative_to(cfg_, path), sha256_hex(content)});
    }

    void stats(const std::string& key, ordered_json value) { stats_[key] = std::move(value); }

    void error(const std::string& where, const ErrorRecord& e) {
        ++errors_;
        if (samples_.size() < 50) {
            samples_.push_back(fmt::format("{}: {}", where, e.message));
        }
    }

    void notice(std::string text) { notices_.push_back(std::move(text)); }

    [[nodiscard]] std::size_t errors() const { return errors_; }

    CommandResult finish(const fs::path& dir) {
        ordered_json j;
        j["command"] = command_;
        j["version"] = version;
        j["model"] = model_;
        const auto config = effective_config_json(cfg_);
        j["config_digest"] = sha256_hex(config);
        j["config"] = ordered_json::parse(config);
        auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
            ordered_json a = ordered_json::array();
            for (const auto& [p, d] : v) {
                a.push_back(ordered_json{{"path", p}, {"sha256", d}});
            }
            return a;
        };
        j["inputs"] = files(inputs_);
        j["outputs"] = files(outputs_);
        j["stats"] = stats_.is_null() ? ordered_json::object() : stats_;
        j["errors"] = errors_;
        j["error_samples"] = samples_;
        j["notices"] = notices_;
        j["status"] = errors_ == 0 ? "ok" : "errors";

        CommandResult r;
        r.errors = errors_;
        r.exit_code = errors_ == 0 ? 0 : 1;
        r.messages = samples_;
        r.messages.insert(r.messages.end(), notices_.begin(), notices_.end());
        r.manifest_path = dir / fmt::format("run-{}.json", command_);
        write_file_atomic(r.manifest_path, j.dump(2) + "\n");
        return r;
    }

  private:
    const RunConfig& cfg_;
    std::string command_;
    std::string model_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    ordered_json stats_;
    std::size_t errors_ = 0;
    std::vector<std::string> samples_;
    std::vector<std::string> notices_;
};

std::string read_input(RunManifest& m, const fs::path& path, std::string_view what) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::IoError, fmt::format("missing {} '{}'", what, path.string()));
    }
    auto content = read_file(path);
    m.input(path, content);
    return content;
}

Corpus load_config_corpus(const RunConfig& cfg, RunManifest& m) {
    const auto manifest = read_input(m, cfg.manifest.resolved, "corpus manifest");
    const auto functions = read_input(m, cfg.functions.resolved, "functions file");
    auto corpus = parse_corpus(manifest, functions, cfg.corpus_options, cfg.manifest.raw);
    for (const auto& w : corpus.warnings) {
        m.notice(w);
    }
    return corpus;
}

PromptTemplates templates_of(const RunConfig& cfg) {
    if (cfg.templates_dir) {
        if (!fs::is_directory(cfg.templates_dir->resolved)) {
            throw Error(ErrorKind::IoError, fmt::format("missing templates directory '{}'", cfg.templates_dir->raw));
        }
        return PromptTemplates::load(cfg.templates_dir->resolved);
    }
    return PromptTemplates::defaults();
}

PromptBuilder builder_for(const RunConfig& cfg, const BackendConfig& backend) {
    PromptOptions opts;
    opts.chars_per_token = cfg.corpus_options.chars_per_token;
    opts.budget_tokens = backend.prompt_budget();
    return PromptBuilder(templates_of(cfg), opts);
}

ordered_json stats_json(const PassStats& s) {
    return ordered_json{{"requests", s.requests}, {"cache_hits", s.cache_hits}, {"cache_repairs", s.cache_repairs}};
}

std::string key_where(const FunctionKey& k) { return fmt::format("{}/{}", k.apk_id, k.function_id); }

// One model's stage files for one corpus variant.
struct ModelRun {
    const RunConfig& cfg;
    const Corpus& corpus;
    std::string label; // backend id, or id+ for the renamed variant
    fs::path dir;

    [[nodiscard]] const BackendConfig& model() const { return cfg.annotator_backend(); }
    [[nodiscard]] fs::path file(std::string_view name) const { return dir / name; }
};

void stage_annotate(const ModelRun& run, RunManifest& m) {
    auto backend = make_backend(run.model());
    const auto result =
        annotate_corpus(*backend, run.corpus, run.cfg.cache_dir.resolved, builder_for(run.cfg, run.model()));
    for (const auto& e : result.entries) {
        if (e.error) {
            m.error(key_where(e.key), *e.error);
        }
    }
    m.stats("annotate", stats_json(result.stats));
    m.emit(run.file("outputs.jsonl"), serialize_annotations(result.entries));
}

void stage_score(const ModelRun& run, RunManifest& m) {
    const auto entries = parse_annotations(read_input(m, run.file("outputs.jsonl"), "outputs file"));
    const auto& scorer_cfg = run.cfg.scorer_backend();
    auto scorer = make_backend(scorer_cfg);
    const auto outputs = successful_outputs(entries);
    const auto result =
        score_descriptors(*scorer, outputs, run.cfg.cache_dir.resolved, builder_for(run.cfg, scorer_cfg));
    for (const auto& e : result.entries) {
        if (e.error) {
            m.error(key_where(e.key), *e.error);
        }
    }
    m.stats("score-descriptors", stats_json(result.stats));
    m.emit(run.file("descriptor_scores.jsonl"), serialize_descriptor_scores(result.entries));
}

void stage_regen(const ModelRun& run, RunManifest& m) {
    const auto entries = parse_annotations(read_input(m, run.file("outputs.jsonl"), "outputs file"));
    auto backend = make_backend(run.model());
    const auto outputs = successful_outputs(entries);
    const auto result =
        regen_names(*backend, outputs, run.cfg.cache_dir.resolved, builder_for(run.cfg, run.model()));
    for (const auto& e : result.entries) {
        if (e.error) {
            m.error(key_where(e.key), *e.error);
        }
    }
    m.stats("regen-names", stats_json(result.stats));
    m.emit(run.file("regen_names.jsonl"), serialize_regen_names(result.entries));
}

void stage_describe(const ModelRun& run, RunManifest& m) {
    const auto entries = parse_annotations(read_input(m, run.file("outputs.jsonl"), "outputs file"));
    const auto outputs = successful_outputs(entries);
    std::map<std::string, std::vector<StructuredOutput>> by_apk;
    for (const auto& o : outputs) {
        by_apk[o.apk_id].push_back(o);
    }
    std::vector<const ApkSample*> apks;
    for (const auto& [id, apk] : run.corpus.apks) {
        apks.push_back(&apk);
    }

    auto backend = make_backend(run.model());
    const auto builder = builder_for(run.cfg, run.model());
    const auto before = backend->requests();
    std::vector<DescriptionEntry> described(apks.size());
    parallel_for(apks.size(), run.model().parallelism, [&](std::size_t i) {
        const auto& apk = *apks[i];
        auto& entry = described[i];
        entry.apk_id = apk.apk_id;
        try {
            const auto it = by_apk.find(apk.apk_id);
            const std::span<const StructuredOutput> own =
                it == by_apk.end() ? std::span<const StructuredOutput>() : std::span(it->second);
            entry.description =
                generate_app_description(*backend, apk, own, builder, run.cfg.cache_dir.resolved,
                                         run.cfg.require_reference);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ConfigError) {
                throw;
            }
            entry.error = ErrorRecord{e.kind(), e.what()};
        }
    });
    for (const auto& e : described) {
        if (e.error) {
            m.error(e.apk_id, *e.error);
        }
    }
    m.stats("describe-apps", ordered_json{{"requests", backend->requests() - before}});
    m.emit(run.file("app_descriptions.jsonl"), serialize_descriptions(described));
}

ordered_json cell_json(const AggregateCell& c) {
    return ordered_json{{"metric", c.metric}, {"mean", c.mean}, {"std", c.std}, {"n", c.n}, {"excluded", c.excluded}};
}

void add_cell(ReportRow& row, RunManifest& m, const std::string& metric, const std::vector<double>& values,
              std::size_t excluded) {
    if (values.empty()) {
        m.notice(fmt::format("{}: no defined per-app values, cell left empty", metric));
        return;
    }
    row.cells.emplace(metric, aggregate_mean_std(metric, values, excluded));
}

std::string error_line(const std::string& apk_id, const ErrorRecord& e) {
    ordered_json j;
    j["apk_id"] = apk_id;
    j["error"] = to_json(e);
    return dump_jsonl_line(j);
}

struct MetricsOutcome {
    ReportRow row;
    Histogram histogram;
};

MetricsOutcome stage_metrics(const ModelRun& run, RunManifest& m) {
    const auto& cfg = run.cfg;
    // Read everything first so a missing input fails before any work.
    const auto entries = parse_annotations(read_input(m, run.file("outputs.jsonl"), "outputs file"));
    std::vector<DescriptorScoreEntry> des;
    std::vector<RegenNameEntry> regen;
    std::vector<DescriptionEntry> descriptions;
    if (cfg.metrics.consistency) {
        des = parse_descriptor_scores(read_input(m, run.file("descriptor_scores.jsonl"), "descriptor scores"));
        regen = parse_regen_names(read_input(m, run.file("regen_names.jsonl"), "regenerated names"));
    }
    if (cfg.metrics.semantic) {
        descriptions = parse_descriptions(read_input(m, run.file("app_descriptions.jsonl"), "app descriptions"));
    }
    std::optional<SynonymTable> synonyms;
    if (cfg.metrics.semantic && cfg.synonyms) {
        read_input(m, cfg.synonyms->resolved, "synonym table");
        synonyms = load_synonyms(cfg.synonyms->resolved);
    }

    const auto outputs = successful_outputs(entries);
    std::map<std::string, std::vector<StructuredOutput>> by_apk;
    for (const auto& o : outputs) {
        by_apk[o.apk_id].push_back(o);
    }
    const auto own = [&](const std::string& apk_id) -> std::span<const StructuredOutput> {
        const auto it = by_apk.find(apk_id);
        return it == by_apk.end() ? std::span<const StructuredOutput>() : std::span(it->second);
    };

    std::vector<const ApkSample*> apks;
    for (const auto& [id, apk] : run.corpus.apks) {
        if (apk.function_ids.empty()) {
            m.notice(fmt::format("apk '{}' has no functions and is skipped", id));
            continue;
        }
        apks.push_back(&apk);
    }

    MetricsOutcome out;
    out.row.model = run.label;
    out.histogram = score_histogram(outputs, run.label);

    if (cfg.metrics.consistency) {
        std::map<std::string, std::map<std::string, double>> des_by_apk;
        std::map<std::string, std::map<std::string, std::string>> names_by_apk;
        for (const auto& e : des) {
            if (e.score) {
                des_by_apk[e.key.apk_id][e.key.function_id] = *e.score;
            }
        }
        for (const auto& e : regen) {
            if (e.name) {
                names_by_apk[e.key.apk_id][e.key.function_id] = *e.name;
            }
        }
        std::string lines;
        std::vector<double> mcs_values;
        std::vector<double> ncs_values;
        for (const auto* apk : apks) {
            try {
                const auto rec = consistency_for_app(*apk, own(apk->apk_id), des_by_apk[apk->apk_id],
                                                     names_by_apk[apk->apk_id]);
                mcs_values.push_back(rec.mcs);
                ncs_values.push_back(rec.ncs_mean);
                lines += dump_jsonl_line(to_json(rec));
            } catch (const Error& e) {
                const ErrorRecord rec{e.kind(), e.what()};
                m.error(apk->apk_id, rec);
                lines += error_line(apk->apk_id, rec);
            }
        }
        m.emit(run.file("consistency.jsonl"), lines);
        add_cell(out.row, m, "MCS", mcs_values, 0);
        add_cell(out.row, m, "NCS", ncs_values, 0);
    }

    if (cfg.metrics.fidelity) {
        std::vector<AppDocument> docs;
        std::vector<const ApkSample*> usable;
        std::string lines;
        for (const auto* apk : apks) {
            try {
                docs.push_back(build_app_document(*apk, own(apk->apk_id)));
                usable.push_back(apk);
            } catch (const Error& e) {
                const ErrorRecord rec{e.kind(), e.what()};
                m.error(apk->apk_id, rec);
                lines += error_line(apk->apk_id, rec);
            }
        }
        auto options = cfg.training;
        options.seed = cfg.seed;
        std::optional<CategoryClassifier> classifier;
        try {
            classifier = train_classifier(docs, options);
        } catch (const Error& e) {
            m.error("classifier", ErrorRecord{e.kind(), e.what()});
        }
        if (classifier) {
            m.emit(run.file("classifier.json"), classifier->to_json());
            const auto& meta = classifier->metadata();
            m.stats("classifier", ordered_json{{"train_size", meta.train_size},
                                               {"test_size", meta.test_size},
                                               {"held_out_accuracy", meta.held_out_accuracy}});
            std::map<std::size_t, std::vector<double>> values;
            std::map<std::size_t, std::size_t> excluded;
            for (const auto* apk : usable) {
                const auto rec = fidelity_for_app(*classifier, *apk, own(apk->apk_id), cfg.ks);
                for (const auto& e : rec.entries) {
                    if (e.mfs) {
                        values[e.k].push_back(*e.mfs);
                    } else {
                        ++excluded[e.k];
                    }
                }
                lines += dump_jsonl_line(to_json(rec));
            }
            for (const auto k : cfg.ks) {
                add_cell(out.row, m, mfs_metric_name(k), values[k], excluded[k]);
            }
        }
        m.emit(run.file("fidelity.jsonl"), lines);
    }

    if (cfg.metrics.semantic) {
        SemanticOptions options;
        options.bleu = cfg.bleu;
        options.synonyms = synonyms ? &*synonyms : nullptr;
        std::map<std::string, const DescriptionEntry*> by_id;
        for (const auto& d : descriptions) {
            by_id.emplace(d.apk_id, &d);
        }
        std::string lines;
        std::vector<double> bleu_v;
        std::vector<double> meteor_v;
        std::vector<double> rouge_v;
        for (const auto* apk : apks) {
            const auto it = by_id.find(apk->apk_id);
            std::optional<ErrorRecord> failure;
            if (it == by_id.end()) {
                failure = ErrorRecord{ErrorKind::CoverageMismatch, "no application description"};
            } else if (it->second->error) {
                failure = ErrorRecord{it->second->error->kind,
                                      "description stage failed: " + it->second->error->message};
            } else {
                try {
                    const auto rec = semantic_for_app(*it->second->description, options);
                    bleu_v.push_back(rec.bleu);
                    meteor_v.push_back(rec.meteor);
                    rouge_v.push_back(rec.rouge_l);
                    lines += dump_jsonl_line(to_json(rec));
                } catch (const Error& e) {
                    failure = ErrorRecord{e.kind(), e.what()};
                }
            }
            if (failure) {
                m.error(apk->apk_id, *failure);
                lines += error_line(apk->apk_id, *failure);
            }
        }
        m.emit(run.file("semantic.jsonl"), lines);
        add_cell(out.row, m, "BLEU", bleu_v, 0);
        add_cell(out.row, m, "METEOR", meteor_v, 0);
        add_cell(out.row, m, "ROUGE-L", rouge_v, 0);
    }

    ordered_json metrics;
    metrics["model"] = run.label;
    metrics["backend_id"] = run.model().backend_id;
    metrics["k"] = cfg.ks;
    ordered_json cells = ordered_json::array();
    for (const auto& c : metric_columns(cfg.ks)) {
        if (const auto it = out.row.cells.find(c); it != out.row.cells.end()) {
            cells.push_back(cell_json(it->second));
        }
    }
    metrics["cells"] = std::move(cells);
    metrics["histogram"] = ordered_json{{"condition", out.histogram.condition}, {"counts", out.histogram.counts}};
    metrics["errors"] = m.errors();
    m.emit(run.file("metrics.json"), metrics.dump(2) + "\n");

    ReportData data;
    data.ks = cfg.ks;
    data.rows.push_back(out.row);
    data.histograms.push_back(out.histogram);
    m.emit(run.file(fmt::format("report.{}", file_extension(cfg.format))), render_report(data, cfg.format));
    return out;
}

struct LoadedMetrics {
    ReportRow row;
    Histogram histogram;
};

std::optional<LoadedMetrics> load_metrics(RunManifest& m, const fs::path& path) {
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    const auto text = read_input(m, path, "metrics");
    try {
        const auto j = json::parse(text);
        LoadedMetrics out;
        out.row.model = j.at("model").get<std::string>();
        for (const auto& c : j.at("cells")) {
            AggregateCell cell;
            cell.metric = c.at("metric").get<std::string>();
            cell.mean = c.at("mean").get<double>();
            cell.std = c.at("std").get<double>();
            cell.n = c.at("n").get<std::size_t>();
            cell.excluded = c.at("excluded").get<std::size_t>();
            out.row.cells.emplace(cell.metric, cell);
        }
        const auto& h = j.at("histogram");
        out.histogram.condition = h.at("condition").get<std::string>();
        const auto counts = h.at("counts").get<std::vector<std::size_t>>();
        if (counts.size() != Histogram::bins) {
            throw Error(ErrorKind::MalformedRecord, "histogram has the wrong number of bins");
        }
        std::copy(counts.begin(), counts.end(), out.histogram.counts.begin());
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::optional<std::string> exclusion_notice(RunManifest& m, const fs::path& summary_path) {
    if (!fs::exists(summary_path)) {
        return std::nullopt;
    }
    const auto j = json::parse(read_input(m, summary_path, "rename summary"));
    if (!j.value("excluded", false)) {
        return std::nullopt;
    }
    return fmt::format("{} excluded from the renaming comparison: copy rate {:.2f}% exceeds {:.2f}%",
                       j.value("model", std::string("?")), 100.0 * j.value("copy_rate", 0.0),
                       100.0 * j.value("threshold", 0.0));
}

CommandResult cmd_ingest(const RunConfig& cfg) {
    RunManifest m(cfg, "ingest", "");
    const auto corpus = load_config_corpus(cfg, m);
    const auto dir = cfg.output_dir.resolved / "corpus";
    m.emit(dir / "manifest.json", serialize_manifest(corpus));
    m.emit(dir / "functions.jsonl", serialize_functions(corpus));
    const auto s = corpus_stats(corpus);
    m.stats("corpus", ordered_json{{"apks", s.apk_count},
                                   {"categories", s.category_count},
                                   {"families", s.family_count},
                                   {"functions", s.total_functions}});
    return m.finish(cfg.output_dir.resolved);
}

CommandResult cmd_dedupe(const RunConfig& cfg) {
    RunManifest m(cfg, "dedupe", "");
    const auto corpus = load_config_corpus(cfg, m);
    const auto deduped = dedupe_category_wise(corpus, cfg.corpus_options.size_bucket_bytes);
    const auto dir = cfg.output_dir.resolved / "corpus-dedup";
    m.emit(dir / "manifest.json", serialize_manifest(deduped));
    m.emit(dir / "functions.jsonl", serialize_functions(deduped));
    const auto before = corpus_stats(corpus);
    const auto after = corpus_stats(deduped);
    m.stats("dedupe", ordered_json{{"apks_before", before.apk_count},
                                   {"apks_after", after.apk_count},
                                   {"functions_before", before.total_functions},
                                   {"functions_after", after.total_functions}});
    return m.finish(cfg.output_dir.resolved);
}

template <typename Stage>
CommandResult cmd_stage(const RunConfig& cfg, const std::string& name, Stage&& stage) {
    const auto& label = cfg.annotator;
    RunManifest m(cfg, name, label);
    const auto corpus = load_config_corpus(cfg, m);
    const ModelRun run{cfg, corpus, label, model_dir(cfg, label)};
    stage(run, m);
    return m.finish(run.dir);
}

CommandResult cmd_report(const RunConfig& cfg) {
    RunManifest m(cfg, "report", "");
    ReportData data;
    data.ks = cfg.ks;
    for (const auto& b : cfg.backends) {
        const auto base = load_metrics(m, model_dir(cfg, b.backend_id) / "metrics.json");
        if (base) {
            data.rows.push_back(base->row);
            auto h = base->histogram;
            h.condition = b.backend_id + " raw";
            data.histograms.push_back(std::move(h));
        }
        const auto plus_dir = model_dir(cfg, renamed_label(b.backend_id));
        if (auto notice = exclusion_notice(m, plus_dir / "rename_summary.json")) {
            data.notices.push_back(std::move(*notice));
        }
        if (auto renamed = load_metrics(m, plus_dir / "metrics.json")) {
            if (base) {
                renamed->row.deltas = report_deltas(base->row, renamed->row);
            }
            data.rows.push_back(renamed->row);
            renamed->histogram.condition = b.backend_id + " renamed";
            data.histograms.push_back(renamed->histogram);
        }
    }
    if (data.rows.empty()) {
        throw Error(ErrorKind::IoError, "no metrics found under the output directory; run metrics first");
    }
    m.emit(cfg.output_dir.resolved / fmt::format("report.{}", file_extension(cfg.format)),
           render_report(data, cfg.format));
    m.emit(cfg.output_dir.resolved / "histograms.csv", render_histograms_csv(data.histograms));
    return m.finish(cfg.output_dir.resolved);
}

CommandResult cmd_rename_experiment(const RunConfig& cfg) {
    const auto& id = cfg.annotator;
    const auto plus = renamed_label(id);
    const auto base_dir = model_dir(cfg, id);
    const auto plus_dir = model_dir(cfg, plus);
    RunManifest m(cfg, "rename-experiment", plus);
    const auto corpus = load_config_corpus(cfg, m);
    const auto entries = parse_annotations(read_input(m, base_dir / "outputs.jsonl", "outputs file"));
    if (!fs::exists(base_dir / "metrics.json")) {
        throw Error(ErrorKind::IoError, fmt::format("missing baseline metrics for '{}'; run metrics first", id));
    }
    const auto baseline = load_metrics(m, base_dir / "metrics.json");

    const auto outputs = successful_outputs(entries);
    const double rate = compute_copy_rate(outputs, corpus);
    const bool excluded = exceeds_copy_threshold(rate, cfg.copy_rate_threshold);

    std::vector<RenameMap> maps;
    std::map<std::size_t, std::size_t> distances;
    std::size_t applied = 0;
    for (const auto& [apk_id, apk] : corpus.apks) {
        maps.push_back(build_rename_map(corpus, apk_id, outputs));
        for (const auto& [fid, e] : maps.back().entries) {
            if (e.applied) {
                ++applied;
                ++distances[levenshtein(e.original, e.suggested)];
            }
        }
    }
    ordered_json summary;
    summary["model"] = id;
    summary["copy_rate"] = rate;
    summary["threshold"] = cfg.copy_rate_threshold;
    summary["excluded"] = excluded;
    summary["functions"] = corpus.functions.size();
    summary["applied"] = applied;
    ordered_json hist = ordered_json::array();
    for (const auto& [d, n] : distances) {
        hist.push_back(ordered_json{{"edit_distance", d}, {"count", n}});
    }
    summary["rename_distance_histogram"] = std::move(hist);
    m.emit(plus_dir / "rename_summary.json", summary.dump(2) + "\n");

    if (excluded) {
        m.notice(fmt::format("{} excluded: copy rate {:.2f}% exceeds threshold {:.2f}%", id, 100.0 * rate,
                             100.0 * cfg.copy_rate_threshold));
        return m.finish(plus_dir);
    }

    auto renamed = apply_renames(corpus, maps, cfg.rename_scope);
    for (const auto& w : renamed.warnings) {
        m.notice(w);
    }
    m.emit(plus_dir / "rename_maps.jsonl", serialize_rename_maps(maps));
    m.emit(plus_dir / "corpus" / "manifest.json", serialize_manifest(renamed.corpus));
    m.emit(plus_dir / "corpus" / "functions.jsonl", serialize_functions(renamed.corpus));

    const ModelRun run{cfg, renamed.corpus, plus, plus_dir};
    stage_annotate(run, m);
    if (cfg.metrics.consistency) {
        stage_score(run, m);
        stage_regen(run, m);
    }
    if (cfg.metrics.semantic) {
        stage_describe(run, m);
    }
    auto outcome = stage_metrics(run, m);

    ReportData data;
    data.ks = cfg.ks;
    data.rows.push_back(baseline->row);
    outcome.row.deltas = report_deltas(baseline->row, outcome.row);
    data.rows.push_back(outcome.row);
    auto raw_hist = baseline->histogram;
    raw_hist.condition = "raw";
    outcome.histogram.condition = "renamed";
    data.histograms = {raw_hist, outcome.histogram};
    m.emit(plus_dir / fmt::format("delta.{}", file_extension(cfg.format)), render_report(data, cfg.format));
    m.emit(plus_dir / "histograms.csv", render_histograms_csv(data.histograms));
    return m.finish(plus_dir);
}

} // namespace

CommandResult run_command(std::string_view command, const RunConfig& cfg) {
    if (command == "ingest") {
        return cmd_ingest(cfg);
    }
    if (command == "dedupe") {
        return cmd_dedupe(cfg);
    }
    if (command == "annotate") {
        return cmd_stage(cfg, "annotate", stage_annotate);
    }
    if (command == "score-descriptors") {
        return cmd_stage(cfg, "score-descriptors", stage_score);
    }
    if (command == "regen-names") {
        return cmd_stage(cfg, "regen-names", stage_regen);
    }
    if (command == "describe-apps") {
        return cmd_stage(cfg, "describe-apps", stage_describe);
    }
    if (command == "metrics") {
        return cmd_stage(cfg, "metrics", [](const ModelRun& run, RunManifest& m) { stage_metrics(run, m); });
    }
    if (command == "rename-experiment") {
        return cmd_rename_experiment(cfg);
    }
    if (command == "report") {
        return cmd_report(cfg);
    }
    throw Error(ErrorKind::ConfigError, fmt::format("unknown command '{}'", command));
}

} // namespace cama
