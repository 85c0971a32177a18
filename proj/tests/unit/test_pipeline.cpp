// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include <catch_amalgamated.hpp>

#include "cama/error.hpp"
#include "cama/pipeline.hpp"
#include "cama/records.hpp"
#include "cama/text.hpp"
#include "fixture.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace cama;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path workspace(const std::string& name, const std::string& extra = "", fixture::Options opts = {}) {
    const auto dir = fs::temp_directory_path() / ("cama_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    opts.apks_per_category = 5;
    opts.functions_per_apk = 6;
    fixture::write_workspace(dir, opts, extra);
    return dir;
}

RunConfig config_of(const fs::path& dir) { return load_run_config(dir / "config.json"); }

void run_all(const RunConfig& cfg) {
    for (const auto* cmd : {"annotate", "score-descriptors", "regen-names", "describe-apps", "metrics"}) {
        const auto r = run_command(cmd, cfg);
        INFO(cmd);
        REQUIRE(r.exit_code == 0);
    }
}

json load_json(const fs::path& p) { return json::parse(read_file(p)); }

int run_cli(const std::string& args) {
    const auto cmd = fmt::format("\"{}\" {} >/dev/null 2>&1", CAMA_CLI_PATH, args);
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void expect_config_error(const std::string& text) {
    try {
        (void)parse_run_config(text, "/tmp");
        FAIL("expected ConfigError for " << text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
    }
}

const std::string kMinimal = R"({"corpus": {"manifest": "m.json", "functions": "f.jsonl"},
  "backends": [{"id": "a", "kind": "mock"}], "annotator": "a", "cache_dir": "c", "output_dir": "o")";

} // namespace

TEST_CASE("config parsing resolves paths and applies defaults") {
    const auto cfg = parse_run_config(kMinimal + "}", "/work");
    CHECK(cfg.manifest.resolved == fs::path("/work/m.json"));
    CHECK(cfg.manifest.raw == "m.json");
    CHECK(cfg.ks == std::vector<std::size_t>{2, 5, 8});
    CHECK(cfg.scorer_backend().backend_id == "a");
    CHECK(cfg.format == ReportFormat::Markdown);
    CHECK(effective_config_json(cfg) == effective_config_json(parse_run_config(kMinimal + "}", "/work")));
}

TEST_CASE("config errors") {
    expect_config_error("not json");
    expect_config_error(kMinimal + R"(, "surprise": 1})");
    expect_config_error(kMinimal + R"(, "scorer": "missing"})");
    expect_config_error(kMinimal + R"(, "k": [0]})");
    expect_config_error(kMinimal + R"(, "format": "xml"})");
    expect_config_error(R"({"corpus": {"manifest": "m.json", "functions": "f.jsonl"},
      "backends": [{"id": "a/b", "kind": "mock"}], "annotator": "a/b", "cache_dir": "c", "output_dir": "o"})");
    expect_config_error(R"({"corpus": {"manifest": "m.json", "functions": "f.jsonl"},
      "backends": [{"id": "a", "kind": "http"}], "annotator": "a", "cache_dir": "c", "output_dir": "o"})");
    expect_config_error(R"({"corpus": {"manifest": "m.json", "functions": "f.jsonl"},
      "backends": [{"id": "a", "kind": "mock"}, {"id": "a", "kind": "mock"}], "annotator": "a",
      "cache_dir": "c", "output_dir": "o"})");
}

TEST_CASE("overrides") {
    auto cfg = parse_run_config(kMinimal + R"(, "seed": 4})", "/work");
    CliOverrides o;
    o.ks = std::vector<std::size_t>{3};
    o.seed = 9;
    o.format = ReportFormat::Json;
    o.only = "fidelity";
    apply_overrides(cfg, o);
    CHECK(cfg.ks == std::vector<std::size_t>{3});
    CHECK(cfg.seed == 9);
    CHECK(cfg.backend("a").seed == 9);
    CHECK(cfg.format == ReportFormat::Json);
    CHECK(!cfg.metrics.consistency);
    CHECK(cfg.metrics.fidelity);
    CliOverrides bad;
    bad.backend = "nope";
    CHECK_THROWS_AS(apply_overrides(cfg, bad), Error);
}

TEST_CASE("missing corpus fails before any work") {
    const auto dir = workspace("missing");
    fs::remove(dir / "functions.jsonl");
    const auto cfg = config_of(dir);
    CHECK_THROWS_AS(run_command("annotate", cfg), Error);
    CHECK(!fs::exists(dir / "out" / "mock-a" / "outputs.jsonl"));
    CHECK_THROWS_AS(run_command("metrics", cfg), Error);
}

TEST_CASE("full pipeline, warm rerun and manifests") {
    const auto dir = workspace("full");
    const auto cfg = config_of(dir);
    run_all(cfg);
    const auto out = dir / "out" / "mock-a";
    for (const auto* f : {"outputs.jsonl", "descriptor_scores.jsonl", "regen_names.jsonl", "app_descriptions.jsonl",
                          "consistency.jsonl", "fidelity.jsonl", "semantic.jsonl", "metrics.json", "report.md"}) {
        INFO(f);
        CHECK(fs::exists(out / f));
    }
    const auto metrics = load_json(out / "metrics.json");
    CHECK(metrics["model"] == "mock-a");
    CHECK(metrics["cells"].size() == 8);

    const auto manifest = load_json(out / "run-annotate.json");
    CHECK(manifest["command"] == "annotate");
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["config_digest"].get<std::string>().size() == 64);
    CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["outputs"][0]["path"] == "out/mock-a/outputs.jsonl");

    const auto before = read_file(out / "outputs.jsonl");
    const auto r = run_command("annotate", cfg);
    CHECK(r.exit_code == 0);
    const auto warm = load_json(out / "run-annotate.json");
    CHECK(warm["stats"]["annotate"]["requests"] == 0);
    CHECK(read_file(out / "outputs.jsonl") == before);

    const auto rep = run_command("report", cfg);
    CHECK(rep.exit_code == 0);
    CHECK(read_file(dir / "out" / "report.md").find("| mock-a |") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "histograms.csv"));
}

TEST_CASE("--only restricts the metric families") {
    const auto dir = workspace("only");
    auto cfg = config_of(dir);
    run_all(cfg);
    CliOverrides o;
    o.only = "consistency";
    apply_overrides(cfg, o);
    REQUIRE(run_command("metrics", cfg).exit_code == 0);
    const auto metrics = load_json(dir / "out" / "mock-a" / "metrics.json");
    std::set<std::string> names;
    for (const auto& c : metrics["cells"]) {
        names.insert(c["metric"].get<std::string>());
    }
    CHECK(names == std::set<std::string>{"MCS", "NCS"});
}

TEST_CASE("distinct scorer is recorded") {
    const auto dir = workspace("scorer", R"("scorer": "mock-b")");
    const auto cfg = config_of(dir);
    REQUIRE(run_command("annotate", cfg).exit_code == 0);
    REQUIRE(run_command("score-descriptors", cfg).exit_code == 0);
    const auto scores = parse_descriptor_scores(read_file(dir / "out" / "mock-a" / "descriptor_scores.jsonl"));
    REQUIRE(!scores.empty());
    for (const auto& s : scores) {
        CHECK(s.model_id == "mock-a");
        CHECK(s.backend_id == "mock-b");
    }
}

TEST_CASE("accuracy gate failure is a recorded error") {
    const auto dir = workspace("gate", R"("fidelity": {"accuracy_gate": 1.01})");
    const auto cfg = config_of(dir);
    for (const auto* cmd : {"annotate", "score-descriptors", "regen-names", "describe-apps"}) {
        REQUIRE(run_command(cmd, cfg).exit_code == 0);
    }
    const auto r = run_command("metrics", cfg);
    CHECK(r.exit_code == 1);
    const auto manifest = load_json(dir / "out" / "mock-a" / "run-metrics.json");
    CHECK(manifest["status"] != "ok");
    CHECK(manifest["error_samples"].dump().find("AccuracyGate") != std::string::npos);
}

TEST_CASE("ingest and dedupe write normalized corpora") {
    const auto dir = workspace("ingest");
    const auto cfg = config_of(dir);
    CHECK(run_command("ingest", cfg).exit_code == 0);
    CHECK(fs::exists(dir / "out" / "corpus" / "functions.jsonl"));
    CHECK(run_command("dedupe", cfg).exit_code == 0);
    CHECK(fs::exists(dir / "out" / "corpus-dedup" / "manifest.json"));
    CHECK_THROWS_AS(run_command("frobnicate", cfg), Error);
}

TEST_CASE("rename experiment writes maps and deltas") {
    const auto dir = workspace("rename", R"("fidelity": {"accuracy_gate": 0.0})");
    const auto cfg = config_of(dir);
    run_all(cfg);
    REQUIRE(run_command("rename-experiment", cfg).exit_code == 0);
    const auto plus = dir / "out" / renamed_label("mock-a");
    CHECK(fs::exists(plus / "rename_maps.jsonl"));
    CHECK(fs::exists(plus / "metrics.json"));
    CHECK(read_file(plus / "delta.md").find("mock-a+") != std::string::npos);
    const auto summary = load_json(plus / "rename_summary.json");
    CHECK(summary["excluded"] == false);
    REQUIRE(run_command("report", cfg).exit_code == 0);
    CHECK(read_file(dir / "out" / "report.md").find("| mock-a+ |") != std::string::npos);
}

TEST_CASE("copy-rate exclusion skips the renamed run") {
    const auto dir = workspace("exclude", R"("rename": {"copy_rate_threshold": -1.0})");
    const auto cfg = config_of(dir);
    run_all(cfg);
    const auto r = run_command("rename-experiment", cfg);
    CHECK(r.exit_code == 0);
    const auto plus = dir / "out" / renamed_label("mock-a");
    CHECK(load_json(plus / "rename_summary.json")["excluded"] == true);
    CHECK(!fs::exists(plus / "metrics.json"));
}

TEST_CASE("command line interface") {
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("annotate") != 0);
    CHECK(run_cli("annotate --config /nonexistent/config.json") != 0);
    const auto dir = workspace("cli");
    const auto config = (dir / "config.json").string();
    CHECK(run_cli(fmt::format("annotate --config \"{}\"", config)) == 0);
    CHECK(run_cli(fmt::format("metrics --config \"{}\" --only nothing", config)) == 2);
    CHECK(run_cli(fmt::format("report --config \"{}\" --format xml", config)) == 2);
    CHECK(fs::exists(dir / "out" / "mock-a" / "outputs.jsonl"));
}
