// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/corpus.hpp"
#include "cama/prompt.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cama {

struct RenameEntry {
    std::string original;
    std::string suggested;
    bool applied = false;
    std::optional<int> collision_suffix; // 2, 3, ... when suffixed

    /// Name the function carries after renaming.
    [[nodiscard]] std::string final_name() const;
};

struct RenameMap {
    std::string apk_id;
    std::map<std::string, RenameEntry> entries; // by function_id
};

enum class RenameScope {
    AllSites,        // definitions and intra-APK call sites
    DefinitionsOnly, // first occurrence inside the function's own code
};

/// Fraction of corpus functions whose suggested name equals the original
/// exactly. Throws Error{CoverageMismatch} unless every function has an output.
double compute_copy_rate(std::span<const StructuredOutput> outputs, const Corpus& corpus);

/// A model is left out of the renaming comparison when its copy rate exceeds the threshold.
bool exceeds_copy_threshold(double copy_rate, double threshold = 0.5);

/// Applied names are made unique within the APK by appending _2, _3, ... in
/// function_id order; names of untouched originals are reserved as well.
RenameMap build_rename_map(const Corpus& corpus, const std::string& apk_id, std::span<const StructuredOutput> outputs);

struct RenameResult {
    Corpus corpus;
    std::vector<std::string> warnings;
};

/// Simultaneous whole-word identifier substitution per APK. An original name
/// shared by functions with different targets is only rewritten inside each
/// function's own code.
RenameResult apply_renames(const Corpus& corpus, const std::vector<RenameMap>& maps,
                           RenameScope scope = RenameScope::AllSites);

/// Rewrites whole-word identifier occurrences in one pass over `text`.
std::string substitute_identifiers(std::string_view text, const std::map<std::string, std::string>& mapping);

/// (new - old) / old in percent; nullopt when old is zero.
std::optional<double> relative_improvement(double old_value, double new_value);

} // namespace cama
