// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/corpus.hpp"
#include "cama/prompt.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

/// Descriptor blocks of one app in function_id order, separated by blank lines.
struct AppDocument {
    std::string apk_id;
    std::string category;
    std::string text;
};

/// Throws Error{CoverageMismatch} unless `outputs` covers every function of the apk.
/// Functions listed in `removed` are left out of the document.
AppDocument build_app_document(const ApkSample& apk, std::span<const StructuredOutput> outputs,
                               const std::set<std::string>& removed = {});

struct TrainOptions {
    std::uint64_t seed = 0;
    double split_fraction = 0.8; // training share per category
    std::size_t epochs = 500;
    double learning_rate = 1.0;
    double l2 = 1e-4;
    double accuracy_gate = 0.9;
};

/// TF-IDF bag of tokens feeding a multinomial logistic (maximum entropy)
/// model trained by full-batch gradient descent from zero weights.
class CategoryClassifier {
  public:
    struct Metadata {
        std::uint64_t seed = 0;
        std::size_t epochs = 0;
        double learning_rate = 0.0;
        double l2 = 0.0;
        std::size_t train_size = 0;
        std::size_t test_size = 0;
        double held_out_accuracy = 0.0;
    };

    /// Probability vector over labels(); sums to 1.
    [[nodiscard]] std::vector<double> predict_proba(std::string_view document) const;
    [[nodiscard]] std::size_t predict(std::string_view document) const;

    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] const Metadata& metadata() const noexcept { return meta_; }
    [[nodiscard]] std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
    [[nodiscard]] const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }

    [[nodiscard]] std::string to_json() const;
    static CategoryClassifier from_json(std::string_view text);

    friend CategoryClassifier train_classifier(std::span<const AppDocument> documents, const TrainOptions& options);

  private:
    using SparseVector = std::vector<std::pair<std::size_t, double>>;
    [[nodiscard]] SparseVector featurize(std::string_view document) const;
    [[nodiscard]] std::vector<double> probabilities(const SparseVector& x) const;

    std::map<std::string, std::size_t> vocabulary_;
    std::vector<double> idf_;
    std::vector<std::vector<double>> weights_; // per class, vocabulary-sized
    std::vector<double> bias_;
    std::vector<std::string> labels_;
    Metadata meta_;
};

/// Stratified seeded split, training, held-out evaluation.
/// Throws Error{DegenerateData} for fewer than 2 classes or fewer than 4
/// documents in a class, Error{AccuracyGate} when held-out accuracy < gate.
CategoryClassifier train_classifier(std::span<const AppDocument> documents, const TrainOptions& options);

/// The k highest-scored outputs, ties by ascending function_id; all when k > n.
std::vector<StructuredOutput> top_k_malicious(std::span<const StructuredOutput> outputs, std::size_t k);

/// (p_full - p_red) / p_full, or nullopt when p_full is zero.
std::optional<double> relative_drop(double p_full, double p_red);

struct MfsEntry {
    std::size_t k = 0;
    std::vector<std::string> removed_ids;
    double p_red = 0.0;
    std::optional<double> mfs; // nullopt: ZeroConfidence, excluded from aggregates
};

struct FidelityRecord {
    std::string apk_id;
    std::string predicted_label;
    double p_full = 0.0;
    std::vector<MfsEntry> entries;
};

/// Predicted class is frozen from the full document; its probability is
/// tracked after removing the top-k functions' descriptors.
MfsEntry mfs_k(const CategoryClassifier& classifier, const ApkSample& apk, std::span<const StructuredOutput> outputs,
               std::size_t k);

FidelityRecord fidelity_for_app(const CategoryClassifier& classifier, const ApkSample& apk,
                                std::span<const StructuredOutput> outputs, std::span<const std::size_t> ks);

} // namespace cama
