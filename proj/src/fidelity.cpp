// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/fidelity.hpp"

#include "cama/error.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace cama {

AppDocument build_app_document(const ApkSample& apk, std::span<const StructuredOutput> outputs,
                               const std::set<std::string>& removed) {
    std::map<std::string, const StructuredOutput*> by_id;
    for (const auto& o : outputs) {
        if (o.apk_id == apk.apk_id) {
            by_id.emplace(o.function_id, &o);
        }
    }
    const bool covered = by_id.size() == apk.function_ids.size() &&
                         std::all_of(apk.function_ids.begin(), apk.function_ids.end(),
                                     [&](const std::string& fid) { return by_id.contains(fid); });
    if (!covered) {
        throw Error(ErrorKind::CoverageMismatch,
                    fmt::format("apk '{}': outputs do not cover its {} functions", apk.apk_id, apk.function_ids.size()));
    }
    std::vector<std::string> blocks;
    for (const auto& [fid, o] : by_id) {
        if (!removed.contains(fid)) {
            blocks.push_back(make_descriptor(*o).text);
        }
    }
    return {apk.apk_id, apk.category, join(blocks, "\n\n")};
}

// ---------------------------------------------------------------------------

CategoryClassifier::SparseVector CategoryClassifier::featurize(std::string_view document) const {
    std::map<std::size_t, double> counts;
    for (const auto& tok : tokenize_words(document)) {
        const auto it = vocabulary_.find(tok);
        if (it != vocabulary_.end()) {
            counts[it->second] += 1.0;
        }
    }
    SparseVector x;
    double norm = 0.0;
    for (const auto& [idx, c] : counts) {
        const double v = c * idf_[idx];
        x.emplace_back(idx, v);
        norm += v * v;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& [idx, v] : x) {
            v /= norm;
        }
    }
    return x;
}

std::vector<double> CategoryClassifier::probabilities(const SparseVector& x) const {
    std::vector<double> logits(labels_.size());
    for (std::size_t c = 0; c < labels_.size(); ++c) {
        double z = bias_[c];
        for (const auto& [idx, v] : x) {
            z += weights_[c][idx] * v;
        }
        logits[c] = z;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& z : logits) {
        z = std::exp(z - top);
        sum += z;
    }
    for (auto& z : logits) {
        z /= sum;
    }
    return logits;
}

std::vector<double> CategoryClassifier::predict_proba(std::string_view document) const {
    return probabilities(featurize(document));
}

std::size_t CategoryClassifier::predict(std::string_view document) const {
    const auto p = predict_proba(document);
    return static_cast<std::size_t>(std::distance(p.begin(), std::max_element(p.begin(), p.end())));
}

std::string CategoryClassifier::to_json() const {
    nlohmann::ordered_json j;
    j["labels"] = labels_;
    std::vector<std::string> vocab(vocabulary_.size());
    for (const auto& [tok, idx] : vocabulary_) {
        vocab[idx] = tok;
    }
    j["vocabulary"] = vocab;
    j["idf"] = idf_;
    j["weights"] = weights_;
    j["bias"] = bias_;
    j["metadata"] = {
        {"seed", meta_.seed},
        {"epochs", meta_.epochs},
        {"learning_rate", meta_.learning_rate},
        {"l2", meta_.l2},
        {"train_size", meta_.train_size},
        {"test_size", meta_.test_size},
        {"held_out_accuracy", meta_.held_out_accuracy},
    };
    return j.dump(1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

CategoryClassifier CategoryClassifier::from_json(std::string_view text) {
    CategoryClassifier c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.labels_ = j.at("labels").get<std::vector<std::string>>();
        const auto vocab = j.at("vocabulary").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            c.vocabulary_.emplace(vocab[i], i);
        }
        c.idf_ = j.at("idf").get<std::vector<double>>();
        c.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
        c.bias_ = j.at("bias").get<std::vector<double>>();
        const auto& m = j.at("metadata");
        c.meta_.seed = m.at("seed").get<std::uint64_t>();
        c.meta_.epochs = m.at("epochs").get<std::size_t>();
        c.meta_.learning_rate = m.at("learning_rate").get<double>();
        c.meta_.l2 = m.at("l2").get<double>();
        c.meta_.train_size = m.at("train_size").get<std::size_t>();
        c.meta_.test_size = m.at("test_size").get<std::size_t>();
        c.meta_.held_out_accuracy = m.at("held_out_accuracy").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("classifier artifact: {}", e.what()));
    }
    const auto classes = c.labels_.size();
    const bool shapes_ok = classes >= 2 && c.bias_.size() == classes && c.weights_.size() == classes &&
                           c.idf_.size() == c.vocabulary_.size() &&
                           std::all_of(c.weights_.begin(), c.weights_.end(),
                                       [&](const auto& row) { return row.size() == c.vocabulary_.size(); });
    if (!shapes_ok) {
        throw Error(ErrorKind::MalformedRecord, "classifier artifact: inconsistent shapes");
    }
    return c;
}

CategoryClassifier train_classifier(std::span<const AppDocument> documents, const TrainOptions& options) {
    std::map<std::string, std::vector<const AppDocument*>> by_class;
    for (const auto& d : documents) {
        by_class[d.category].push_back(&d);
    }
    if (by_class.size() < 2) {
        throw Error(ErrorKind::DegenerateData, fmt::format("need at least 2 categories, got {}", by_class.size()));
    }
    for (const auto& [label, docs] : by_class) {
        if (docs.size() < 4) {
            throw Error(ErrorKind::DegenerateData,
                        fmt::format("category '{}' has {} documents, need at least 4", label, docs.size()));
        }
    }
    if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0)) {
        throw Error(ErrorKind::ConfigError, "split_fraction must lie in (0, 1)");
    }

    CategoryClassifier clf;
    std::map<std::string, std::size_t> label_index;
    for (const auto& [label, docs] : by_class) {
        label_index.emplace(label, clf.labels_.size());
        clf.labels_.push_back(label);
    }

    // Stratified split. Fisher-Yates with raw engine output keeps the
    // permutation identical across standard libraries.
    std::mt19937_64 rng(options.seed);
    std::vector<const AppDocument*> train;
    std::vector<const AppDocument*> test;
    for (auto& [label, docs] : by_class) {
        std::sort(docs.begin(), docs.end(), [](const auto* a, const auto* b) { return a->apk_id < b->apk_id; });
        for (std::size_t i = docs.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng() % (i + 1));
            std::swap(docs[i], docs[j]);
        }
        const auto n = docs.size();
        auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - options.split_fraction)));
        n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
        test.insert(test.end(), docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_test));
        train.insert(train.end(), docs.begin() + static_cast<std::ptrdiff_t>(n_test), docs.end());
    }
    const auto by_id = [](const auto* a, const auto* b) { return a->apk_id < b->apk_id; };
    std::sort(train.begin(), train.end(), by_id);
    std::sort(test.begin(), test.end(), by_id);

    // Vocabulary and smoothed idf from the training split only.
    std::map<std::string, std::size_t> df;
    for (const auto* d : train) {
        auto tokens = tokenize_words(d->text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& t : tokens) {
            ++df[t];
        }
    }
    const double n_docs = static_cast<double>(train.size());
    for (const auto& [tok, count] : df) {
        clf.vocabulary_.emplace(tok, clf.idf_.size());
        clf.idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
    }

    const auto classes = clf.labels_.size();
    const auto vocab = clf.vocabulary_.size();
    clf.weights_.assign(classes, std::vector<double>(vocab, 0.0));
    clf.bias_.assign(classes, 0.0);

    std::vector<CategoryClassifier::SparseVector> xs;
    std::vector<std::size_t> ys;
    for (const auto* d : train) {
        xs.push_back(clf.featurize(d->text));
        ys.push_back(label_index.at(d->category));
    }

    std::vector<std::vector<double>> grad_w(classes, std::vector<double>(vocab));
    std::vector<double> grad_b(classes);
    const double inv_n = 1.0 / n_docs;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t v = 0; v < vocab; ++v) {
                grad_w[c][v] = options.l2 * clf.weights_[c][v];
            }
            grad_b[c] = 0.0;
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto p = clf.probabilities(xs[i]);
            for (std::size_t c = 0; c < classes; ++c) {
                const double err = (p[c] - (ys[i] == c ? 1.0 : 0.0)) * inv_n;
                grad_b[c] += err;
                for (const auto& [idx, val] : xs[i]) {
                    grad_w[c][idx] += err * val;
                }
            }
        }
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t v = 0; v < vocab; ++v) {
                clf.weights_[c][v] -= options.learning_rate * grad_w[c][v];
            }
            clf.bias_[c] -= options.learning_rate * grad_b[c];
        }
    }

    std::size_t correct = 0;
    for (const auto* d : test) {
        if (clf.labels_[clf.predict(d->text)] == d->category) {
            ++correct;
        }
    }
    clf.meta_.seed = options.seed;
    clf.meta_.epochs = options.epochs;
    clf.meta_.learning_rate = options.learning_rate;
    clf.meta_.l2 = options.l2;
    clf.meta_.train_size = train.size();
    clf.meta_.test_size = test.size();
    clf.meta_.held_out_accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    if (clf.meta_.held_out_accuracy < options.accuracy_gate) {
        throw Error(ErrorKind::AccuracyGate, fmt::format("held-out accuracy {:.4f} below gate {:.4f}",
                                                         clf.meta_.held_out_accuracy, options.accuracy_gate));
    }
    return clf;
}

// ---------------------------------------------------------------------------

std::vector<StructuredOutput> top_k_malicious(std::span<const StructuredOutput> outputs, std::size_t k) {
    std::vector<StructuredOutput> sorted(outputs.begin(), outputs.end());
    std::sort(sorted.begin(), sorted.end(), more_malicious);
    if (sorted.size() > k) {
        sorted.resize(k);
    }
    return sorted;
}

std::optional<double> relative_drop(double p_full, double p_red) {
    if (p_full <= 0.0) {
        return std::nullopt;
    }
    return (p_full - p_red) / p_full;
}

namespace {

std::vector<StructuredOutput> outputs_of(const ApkSample& apk, std::span<const StructuredOutput> outputs) {
    std::vector<StructuredOutput> out;
    for (const auto& o : outputs) {
        if (o.apk_id == apk.apk_id) {
            out.push_back(o);
        }
    }
    return out;
}

MfsEntry entry_for(const CategoryClassifier& classifier, const ApkSample& apk, std::span<const StructuredOutput> own,
                   std::size_t predicted, double p_full, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::ConfigError, "k must be at least 1");
    }
    MfsEntry entry;
    entry.k = k;
    std::set<std::string> removed;
    for (const auto& o : top_k_malicious(own, k)) {
        entry.removed_ids.push_back(o.function_id);
        removed.insert(o.function_id);
    }
    const auto reduced = build_app_document(apk, own, removed);
    entry.p_red = classifier.predict_proba(reduced.text)[predicted];
    entry.mfs = relative_drop(p_full, entry.p_red);
    return entry;
}

} // namespace

MfsEntry mfs_k(const CategoryClassifier& classifier, const ApkSample& apk, std::span<const StructuredOutput> outputs,
               std::size_t k) {
    const auto own = outputs_of(apk, outputs);
    const auto full = build_app_document(apk, own);
    const auto p = classifier.predict_proba(full.text);
    const auto predicted = static_cast<std::size_t>(std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    return entry_for(classifier, apk, own, predicted, p[predicted], k);
}

FidelityRecord fidelity_for_app(const CategoryClassifier& classifier, const ApkSample& apk,
                                std::span<const StructuredOutput> outputs, std::span<const std::size_t> ks) {
    const auto own = outputs_of(apk, outputs);
    const auto full = build_app_document(apk, own);
    const auto p = classifier.predict_proba(full.text);
    const auto predicted = static_cast<std::size_t>(std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    FidelityRecord rec;
    rec.apk_id = apk.apk_id;
    rec.predicted_label = classifier.labels()[predicted];
    rec.p_full = p[predicted];
    for (const auto k : ks) {
        rec.entries.push_back(entry_for(classifier, apk, own, predicted, rec.p_full, k));
    }
    return rec;
}

} // namespace cama
