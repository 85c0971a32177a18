// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/error.hpp"
#include "cama/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>

namespace {

std::vector<std::size_t> parse_k_list(const std::string& text) {
    std::vector<std::size_t> ks;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find(',', pos), text.size());
        const auto item = text.substr(pos, end - pos);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw cama::Error(cama::ErrorKind::ConfigError, fmt::format("--k: '{}' is not a positive integer", item));
        }
        ks.push_back(static_cast<std::size_t>(v));
        pos = end + 1;
    }
    return ks;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark code language models on decompiled Android functions"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cama::version));

    std::string config_path;
    std::string backend;
    std::string k_list;
    std::string format;
    std::uint64_t seed = 0;
    std::string cache_dir;
    std::string only;

    for (const auto& name : cama::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--backend", backend, "Backend id to evaluate (overrides 'annotator')");
        sub->add_option("--k", k_list, "Comma-separated top-k list, e.g. 2,5,8");
        sub->add_option("--format", format, "Report format: md, csv or json");
        sub->add_option("--seed", seed, "Run seed");
        sub->add_option("--cache-dir", cache_dir, "Completion cache directory");
        if (name == "metrics" || name == "rename-experiment") {
            sub->add_option("--only", only, "Compute a single metric family")
                ->check(CLI::IsMember({"consistency", "fidelity", "semantic"}));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help and version exit 0; every usage error maps to 2
        return app.exit(e) == 0 ? 0 : 2;
    }
    const auto* sub = app.get_subcommands().front();

    try {
        auto cfg = cama::load_run_config(config_path);
        cama::CliOverrides o;
        if (sub->count("--backend") > 0) {
            o.backend = backend;
        }
        if (sub->count("--k") > 0) {
            o.ks = parse_k_list(k_list);
        }
        if (sub->count("--format") > 0) {
            o.format = cama::parse_format(format);
        }
        if (sub->count("--seed") > 0) {
            o.seed = seed;
        }
        if (sub->count("--cache-dir") > 0) {
            o.cache_dir = cache_dir;
        }
        if (!only.empty()) {
            o.only = only;
        }
        cama::apply_overrides(cfg, o);

        const auto result = cama::run_command(sub->get_name(), cfg);
        for (const auto& msg : result.messages) {
            std::fprintf(stderr, "%s\n", msg.c_str());
        }
        std::fprintf(stderr, "%s: %zu error(s); manifest %s\n", sub->get_name().c_str(), result.errors,
                     result.manifest_path.string().c_str());
        return result.exit_code;
    } catch (const cama::Error& e) {
        std::fprintf(stderr, "cama %s: %s\n", sub->get_name().c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cama %s: unexpected failure: %s\n", sub->get_name().c_str(), e.what());
        return 2;
    }
}
