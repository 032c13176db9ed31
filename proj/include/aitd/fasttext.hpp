// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bag of word unigrams and hashed word bigrams, averaged into one vector and
// classified by a linear softmax layer.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aitd/text.hpp"

namespace aitd::fasttext {

class FeatureSpace {
public:
    static constexpr std::size_t kUnk = 0;

    FeatureSpace() : FeatureSpace({}, 65536, 100, 0) {}
    /// `words` excludes the unknown-word entry, which always has id 0.
    FeatureSpace(std::vector<std::string> words, std::size_t buckets, std::size_t dim, std::uint32_t hash_seed);

    /// Unigram vocabulary from segmented training texts, sorted by code
    /// point so the result is independent of corpus order.
    static FeatureSpace build(std::span<const std::vector<std::string>> segmented, std::size_t buckets,
                              std::size_t dim, std::uint32_t hash_seed = 0);

    std::size_t unigram_count() const { return words_.size(); }
    std::size_t buckets() const { return buckets_; }
    std::size_t dim() const { return dim_; }
    std::uint32_t hash_seed() const { return hash_seed_; }
    /// Embedding rows: unigrams first, then buckets.
    std::size_t rows() const { return words_.size() + buckets_; }

    std::size_t word_index(const std::string& word) const;
    /// unigram_count() + FNV-1a-32(a + " " + b, seed) mod buckets.
    std::size_t bigram_index(const std::string& a, const std::string& b) const;

    FeatureSpace with_dim(std::size_t dim) const;

    nlohmann::json to_json() const;
    static FeatureSpace from_json(const nlohmann::json& doc);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t buckets_;
    std::size_t dim_;
    std::uint32_t hash_seed_;
};

/// One unigram index per word plus one bucket index per adjacent pair.
/// Whitespace-only words are dropped first.
std::vector<std::size_t> extract_features(std::span<const std::string> words, const FeatureSpace& space);

struct LinearModel {
    std::size_t rows = 0;
    std::size_t dim = 0;
    /// [rows x dim]
    std::vector<float> embeddings;
    /// [2 x dim]
    std::vector<float> output_weights;
    std::array<float, 2> output_bias{};

    /// Embeddings uniform in [-1/dim, 1/dim]; output layer zero.
    static LinearModel initialize(const FeatureSpace& space, std::uint64_t seed);
    bool operator==(const LinearModel&) const = default;
};

/// Softmax over the two classes. Throws on an empty feature list.
std::array<double, 2> forward(std::span<const std::size_t> features, const LinearModel& model);

struct TrainingExample {
    std::vector<std::size_t> features;
    text::Label label = text::Label::kHuman;
};

struct TrainSettings {
    std::size_t epochs = 5;
    float lr0 = 0.05f;
    std::uint64_t seed = 0;
};

/// Per-example SGD on cross-entropy, learning rate decaying linearly to zero
/// over epochs * |corpus| updates; example order reshuffled every epoch.
LinearModel train(std::span<const TrainingExample> corpus, const FeatureSpace& space, const TrainSettings& settings);

/// Continues training an existing model for one epoch of the same schedule.
/// `epoch` is zero-based; the schedule spans `total_epochs`.
void train_epoch(LinearModel& model, std::span<const TrainingExample> corpus, std::size_t epoch,
                 std::size_t total_epochs, float lr0, std::uint64_t seed);

int predict(std::span<const std::size_t> features, const LinearModel& model);

struct SearchGrid {
    std::vector<std::size_t> dims{50, 100, 200};
    std::vector<std::size_t> epochs{5, 25};
    std::vector<float> lrs{0.05f, 0.1f, 0.5f};
};

struct GridPoint {
    std::size_t dim = 0;
    std::size_t epochs = 0;
    float lr0 = 0.0f;
    double dev_macro_f1 = 0.0;
};

struct SearchResult {
    GridPoint best;
    LinearModel model;
    FeatureSpace space;
    std::vector<GridPoint> evaluated;
};

/// Trains every grid point on `train` and keeps the best dev macro-F1; ties
/// go to smaller dim, then fewer epochs, then smaller lr0.
SearchResult hyperparameter_search(std::span<const std::vector<std::string>> train_words,
                                   std::span<const text::Label> train_labels,
                                   std::span<const std::vector<std::string>> dev_words,
                                   std::span<const text::Label> dev_labels, const SearchGrid& grid,
                                   std::size_t buckets, std::uint64_t seed);

} // namespace aitd::fasttext
