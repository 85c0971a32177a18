// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/consistency.hpp"

#include "cama/error.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cama {

std::vector<double> normalize_scores(std::span<const double> raw) {
    if (raw.empty()) {
        throw Error(ErrorKind::EmptyVector, "cannot normalize an empty score vector");
    }
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    std::vector<double> out(raw.size());
    if (sum <= 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(raw.size()));
        return out;
    }
    std::transform(raw.begin(), raw.end(), out.begin(), [sum](double v) { return v / sum; });
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw Error(ErrorKind::LengthMismatch, fmt::format("KL over lengths {} and {}", p.size(), q.size()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) {
            continue;
        }
        if (q[i] <= 0.0) {
            throw Error(ErrorKind::UnsupportedSupport, fmt::format("p[{}] > 0 but q[{}] = 0", i, i));
        }
        total += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(total, 0.0);
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw Error(ErrorKind::LengthMismatch, fmt::format("JSD over lengths {} and {}", p.size(), q.size()));
    }
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = 0.5 * (p[i] + q[i]);
    }
    const double jsd = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
    return std::clamp(jsd, 0.0, std::numbers::ln2);
}

double mcs(std::span<const double> raw_scores, std::span<const double> des_scores) {
    if (raw_scores.size() != des_scores.size()) {
        throw Error(ErrorKind::LengthMismatch,
                    fmt::format("score vectors of lengths {} and {}", raw_scores.size(), des_scores.size()));
    }
    const auto p = normalize_scores(raw_scores);
    const auto q = normalize_scores(des_scores);
    return std::clamp(1.0 - jensen_shannon(p, q) / std::numbers::ln2, 0.0, 1.0);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    const auto s = decode_utf8(a);
    const auto t = decode_utf8(b);
    if (s.empty()) {
        return t.size();
    }
    if (t.empty()) {
        return s.size();
    }
    // single-row DP over the shorter string
    const auto& longer = s.size() >= t.size() ? s : t;
    const auto& shorter = s.size() >= t.size() ? t : s;
    std::vector<std::size_t> row(shorter.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= longer.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= shorter.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t cost = longer[i - 1] == shorter[j - 1] ? 0 : 1;
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[shorter.size()];
}

double ncs(std::string_view n_raw, std::string_view n_reg) {
    const auto a = trim(n_raw);
    const auto b = trim(n_reg);
    const auto longest = std::max(codepoint_count(a), codepoint_count(b));
    if (longest == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

ConsistencyRecord consistency_for_app(const ApkSample& apk, std::span<const StructuredOutput> raw_outputs,
                                      const std::map<std::string, double>& des_scores,
                                      const std::map<std::string, std::string>& regen_names) {
    std::map<std::string, const StructuredOutput*> raw;
    for (const auto& o : raw_outputs) {
        if (o.apk_id == apk.apk_id) {
            raw.emplace(o.function_id, &o);
        }
    }
    const auto covers = [&](const auto& keyed) {
        if (keyed.size() != apk.function_ids.size()) {
            return false;
        }
        return std::all_of(apk.function_ids.begin(), apk.function_ids.end(),
                           [&](const std::string& fid) { return keyed.contains(fid); });
    };
    if (!covers(raw)) {
        throw Error(ErrorKind::CoverageMismatch, fmt::format("apk '{}': raw outputs do not cover its functions", apk.apk_id));
    }
    if (!covers(des_scores)) {
        throw Error(ErrorKind::CoverageMismatch,
                    fmt::format("apk '{}': descriptor scores do not cover its functions", apk.apk_id));
    }
    if (!covers(regen_names)) {
        throw Error(ErrorKind::CoverageMismatch,
                    fmt::format("apk '{}': regenerated names do not cover its functions", apk.apk_id));
    }
    if (apk.function_ids.empty()) {
        throw Error(ErrorKind::EmptyVector, fmt::format("apk '{}' has no functions", apk.apk_id));
    }

    ConsistencyRecord rec;
    rec.apk_id = apk.apk_id;
    std::vector<double> raw_scores;
    std::vector<double> des;
    for (const auto& fid : apk.function_ids) {
        const auto& o = *raw.at(fid);
        raw_scores.push_back(o.maliciousness);
        des.push_back(des_scores.at(fid));
        const auto& regen = regen_names.at(fid);
        rec.names.push_back({fid, o.suggested_name, regen, ncs(o.suggested_name, regen)});
    }
    const auto all_zero = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x <= 0.0; });
    };
    rec.uniform_fallback = all_zero(raw_scores) || all_zero(des);
    rec.mcs = mcs(raw_scores, des);
    double sum = 0.0;
    for (const auto& n : rec.names) {
        sum += n.ncs;
    }
    rec.ncs_mean = sum / static_cast<double>(rec.names.size());
    return rec;
}

} // namespace cama
