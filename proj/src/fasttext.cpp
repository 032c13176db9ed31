// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/fasttext.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "aitd/error.hpp"
#include "aitd/metrics.hpp"
#include "aitd/optim.hpp"
#include "aitd/rng.hpp"

namespace aitd::fasttext {

namespace {

bool is_blank(const std::string& w) {
    return std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace

FeatureSpace::FeatureSpace(std::vector<std::string> words, std::size_t buckets, std::size_t dim,
                           std::uint32_t hash_seed)
    : buckets_(buckets), dim_(dim), hash_seed_(hash_seed) {
    if (buckets == 0 || dim == 0) {
        throw ConfigError("fasttext: buckets and dim must be positive");
    }
    words_.push_back("<unk>");
    for (auto& w : words) {
        if (index_.count(w) || w == words_[0]) {
            throw ConfigError("fasttext: duplicate word '" + w + "'");
        }
        index_.emplace(w, words_.size());
        words_.push_back(std::move(w));
    }
}

FeatureSpace FeatureSpace::build(std::span<const std::vector<std::string>> segmented, std::size_t buckets,
                                 std::size_t dim, std::uint32_t hash_seed) {
    std::set<std::string> unique;
    for (const auto& words : segmented) {
        for (const auto& w : words) {
            if (!is_blank(w)) {
                unique.insert(w);
            }
        }
    }
    unique.erase("<unk>");
    return FeatureSpace(std::vector<std::string>(unique.begin(), unique.end()), buckets, dim, hash_seed);
}

std::size_t FeatureSpace::word_index(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

std::size_t FeatureSpace::bigram_index(const std::string& a, const std::string& b) const {
    return words_.size() + fnv1a32(a + " " + b, hash_seed_) % buckets_;
}

FeatureSpace FeatureSpace::with_dim(std::size_t dim) const {
    FeatureSpace copy = *this;
    if (dim == 0) {
        throw ConfigError("fasttext: dim must be positive");
    }
    copy.dim_ = dim;
    return copy;
}

nlohmann::json FeatureSpace::to_json() const {
    return {{"buckets", buckets_},
            {"dim", dim_},
            {"hash_seed", hash_seed_},
            {"words", std::vector<std::string>(words_.begin() + 1, words_.end())}};
}

FeatureSpace FeatureSpace::from_json(const nlohmann::json& doc) {
    try {
        return FeatureSpace(doc.at("words").get<std::vector<std::string>>(), doc.at("buckets").get<std::size_t>(),
                            doc.at("dim").get<std::size_t>(), doc.at("hash_seed").get<std::uint32_t>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("fasttext feature space: ") + e.what());
    }
}

std::vector<std::size_t> extract_features(std::span<const std::string> words, const FeatureSpace& space) {
    std::vector<const std::string*> kept;
    for (const auto& w : words) {
        if (!is_blank(w)) {
            kept.push_back(&w);
        }
    }
    std::vector<std::size_t> out;
    out.reserve(kept.empty() ? 0 : 2 * kept.size() - 1);
    for (const auto* w : kept) {
        out.push_back(space.word_index(*w));
    }
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
        out.push_back(space.bigram_index(*kept[i], *kept[i + 1]));
    }
    return out;
}

LinearModel LinearModel::initialize(const FeatureSpace& space, std::uint64_t seed) {
    LinearModel m;
    m.rows = space.rows();
    m.dim = space.dim();
    m.embeddings.resize(m.rows * m.dim);
    const double bound = 1.0 / static_cast<double>(m.dim);
    Rng rng(seed);
    for (float& x : m.embeddings) {
        x = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
    m.output_weights.assign(2 * m.dim, 0.0f);
    return m;
}

namespace {

void average(std::span<const std::size_t> features, const LinearModel& model, std::vector<float>& hidden) {
    if (features.empty()) {
        throw Error("fasttext: empty feature list");
    }
    hidden.assign(model.dim, 0.0f);
    for (std::size_t f : features) {
        if (f >= model.rows) {
            throw Error("fasttext: feature index " + std::to_string(f) + " out of range");
        }
        const float* row = &model.embeddings[f * model.dim];
        for (std::size_t j = 0; j < model.dim; ++j) {
            hidden[j] += row[j];
        }
    }
    const float inv = 1.0f / static_cast<float>(features.size());
    for (float& h : hidden) {
        h *= inv;
    }
}

std::array<double, 2> softmax_logits(const std::vector<float>& hidden, const LinearModel& model) {
    std::array<double, 2> z{};
    for (std::size_t c = 0; c < 2; ++c) {
        double s = model.output_bias[c];
        for (std::size_t j = 0; j < model.dim; ++j) {
            s += static_cast<double>(model.output_weights[c * model.dim + j]) * hidden[j];
        }
        z[c] = s;
    }
    const double mx = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

} // namespace

std::array<double, 2> forward(std::span<const std::size_t> features, const LinearModel& model) {
    std::vector<float> hidden;
    average(features, model, hidden);
    return softmax_logits(hidden, model);
}

int predict(std::span<const std::size_t> features, const LinearModel& model) {
    const auto p = forward(features, model);
    return p[1] > p[0] ? 1 : 0;
}

void train_epoch(LinearModel& model, std::span<const TrainingExample> corpus, std::size_t epoch,
                 std::size_t total_epochs, float lr0, std::uint64_t seed) {
    if (corpus.empty()) {
        throw Error("fasttext: empty training corpus");
    }
    const std::uint64_t total = static_cast<std::uint64_t>(total_epochs) * corpus.size();
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(seed, "fasttext/epoch/" + std::to_string(epoch)));
    shuffle.shuffle(std::span(order));

    std::vector<float> hidden, grad_hidden(model.dim);
    std::uint64_t step = static_cast<std::uint64_t>(epoch) * corpus.size();
    for (std::size_t idx : order) {
        const auto& ex = corpus[idx];
        const float lr = linear_decay_rate(step++, total, lr0);
        if (ex.features.empty()) {
            continue;
        }
        average(ex.features, model, hidden);
        const auto p = softmax_logits(hidden, model);
        const int y = text::label_index(ex.label);
        // d(loss)/d(logit_c) = p_c - [c == y]
        const float g[2] = {static_cast<float>(p[0] - (y == 0 ? 1.0 : 0.0)),
                            static_cast<float>(p[1] - (y == 1 ? 1.0 : 0.0))};
        std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0f);
        for (std::size_t c = 0; c < 2; ++c) {
            float* w = &model.output_weights[c * model.dim];
            for (std::size_t j = 0; j < model.dim; ++j) {
                grad_hidden[j] += g[c] * w[j];
                w[j] -= lr * g[c] * hidden[j];
            }
            model.output_bias[c] -= lr * g[c];
        }
        const float row_scale = lr / static_cast<float>(ex.features.size());
        for (std::size_t f : ex.features) {
            float* row = &model.embeddings[f * model.dim];
            for (std::size_t j = 0; j < model.dim; ++j) {
                row[j] -= row_scale * grad_hidden[j];
            }
        }
    }
}

LinearModel train(std::span<const TrainingExample> corpus, const FeatureSpace& space, const TrainSettings& settings) {
    if (corpus.empty()) {
        throw Error("fasttext: empty training corpus");
    }
    if (settings.epochs == 0) {
        throw ConfigError("fasttext: epochs must be positive");
    }
    LinearModel model = LinearModel::initialize(space, derive_seed(settings.seed, "fasttext/init"));
    for (std::size_t e = 0; e < settings.epochs; ++e) {
        train_epoch(model, corpus, e, settings.epochs, settings.lr0, settings.seed);
    }
    return model;
}

SearchResult hyperparameter_search(std::span<const std::vector<std::string>> train_words,
                                   std::span<const text::Label> train_labels,
                                   std::span<const std::vector<std::string>> dev_words,
                                   std::span<const text::Label> dev_labels, const SearchGrid& grid,
                                   std::size_t buckets, std::uint64_t seed) {
    if (train_words.size() != train_labels.size() || dev_words.size() != dev_labels.size()) {
        throw Error("hyperparameter_search: texts and labels differ in length");
    }
    if (dev_words.empty()) {
        throw Error("hyperparameter_search: empty dev set");
    }
    if (grid.dims.empty() || grid.epochs.empty() || grid.lrs.empty()) {
        throw ConfigError("hyperparameter_search: empty grid");
    }
    auto dims = grid.dims;
    auto epochs = grid.epochs;
    auto lrs = grid.lrs;
    std::sort(dims.begin(), dims.end());
    std::sort(epochs.begin(), epochs.end());
    std::sort(lrs.begin(), lrs.end());

    const FeatureSpace base = FeatureSpace::build(train_words, buckets, dims.front());
    std::vector<TrainingExample> train_set;
    for (std::size_t i = 0; i < train_words.size(); ++i) {
        train_set.push_back({extract_features(train_words[i], base), train_labels[i]});
    }
    std::vector<std::vector<std::size_t>> dev;
    std::vector<int> dev_gold;
    for (std::size_t i = 0; i < dev_words.size(); ++i) {
        dev.push_back(extract_features(dev_words[i], base));
        dev_gold.push_back(text::label_index(dev_labels[i]));
    }

    std::optional<SearchResult> best;
    std::vector<GridPoint> evaluated;
    // Ascending order plus strict improvement implements the tie rule.
    for (std::size_t d : dims) {
        const FeatureSpace space = base.with_dim(d);
        for (std::size_t e : epochs) {
            for (float lr : lrs) {
                LinearModel model = train(train_set, space, TrainSettings{e, lr, seed});
                std::vector<int> preds;
                for (const auto& f : dev) {
                    preds.push_back(f.empty() ? 0 : predict(f, model));
                }
                const double f1 = metrics::compute_metrics(preds, dev_gold).macro.f1;
                GridPoint point{d, e, lr, f1};
                evaluated.push_back(point);
                if (!best || f1 > best->best.dev_macro_f1) {
                    best = SearchResult{point, std::move(model), space, {}};
                }
            }
        }
    }
    best->evaluated = std::move(evaluated);
    return std::move(*best);
}

} // namespace aitd::fasttext
