// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/corpus.hpp"
#include "cama/prompt.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

/// Normalized per-app maliciousness vector, indexed by sorted function_id.
struct ScoreDistribution {
    std::string apk_id;
    std::vector<double> values;
};

struct NameConsistency {
    std::string function_id;
    std::string n_raw;
    std::string n_reg;
    double ncs = 0.0;
};

struct ConsistencyRecord {
    std::string apk_id;
    double mcs = 0.0;
    std::vector<NameConsistency> names;
    double ncs_mean = 0.0;
    /// True when a score vector was all zeros and fell back to uniform.
    bool uniform_fallback = false;
};

/// Divides by the sum; an all-zero vector maps to uniform.
/// Throws Error{EmptyVector}; negative entries are a precondition violation.
std::vector<double> normalize_scores(std::span<const double> raw);

/// Sum p(i) ln(p(i)/q(i)) in nats, with 0 ln(0/q) = 0.
/// Throws Error{LengthMismatch, UnsupportedSupport}.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// In [0, ln 2]. Throws Error{LengthMismatch}.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

/// 1 - JSD(normalize(raw), normalize(des)) / ln 2.
double mcs(std::span<const double> raw_scores, std::span<const double> des_scores);

/// Unit-cost edit distance over Unicode scalar values.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - levenshtein / max length, after trimming whitespace; both empty -> 1.
double ncs(std::string_view n_raw, std::string_view n_reg);

/// Inputs are keyed by function_id and must cover exactly the apk's functions.
/// Throws Error{CoverageMismatch}.
ConsistencyRecord consistency_for_app(const ApkSample& apk, std::span<const StructuredOutput> raw_outputs,
                                      const std::map<std::string, double>& des_scores,
                                      const std::map<std::string, std::string>& regen_names);

} // namespace cama
