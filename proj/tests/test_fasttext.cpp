// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "aitd/error.hpp"
#include "aitd/fasttext.hpp"
#include "aitd/metrics.hpp"
#include "aitd/rng.hpp"

using namespace aitd;
using namespace aitd::fasttext;
using text::Label;

namespace {

// Reference 32-bit FNV-1a (offset basis 2166136261, prime 16777619).
std::uint32_t reference_fnv1a(const std::string& s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

using Words = std::vector<std::string>;

FeatureSpace space_of(std::vector<Words> corpus, std::size_t buckets = 97, std::size_t dim = 4) {
    return FeatureSpace::build(corpus, buckets, dim);
}

} // namespace

TEST_CASE("feature counts and index ranges") {
    const auto space = space_of({{"我们", "公园", "春天"}});
    CHECK(space.unigram_count() == 4);
    CHECK(extract_features(Words{"我们"}, space).size() == 1);
    const Words k{"我们", "去", "公园", "春天", "我们"};
    const auto f = extract_features(k, space);
    REQUIRE(f.size() == 2 * k.size() - 1);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(f[i] < space.unigram_count());
    for (std::size_t i = k.size(); i < f.size(); ++i) {
        CHECK(f[i] >= space.unigram_count());
        CHECK(f[i] < space.rows());
    }
    CHECK(f[1] == FeatureSpace::kUnk);
    CHECK(extract_features(Words{" ", "我们", "\t"}, space).size() == 1);
    CHECK(extract_features(Words{}, space).empty());
}

TEST_CASE("bigram hashing is 32-bit FNV-1a over the space-joined pair, mod buckets") {
    CHECK(reference_fnv1a("a") == 0xe40c292cu);
    CHECK(fnv1a32("a") == 0xe40c292cu);
    CHECK(fnv1a32("foobar") == reference_fnv1a("foobar"));
    const auto space = space_of({{"春天", "来了"}}, 65536);
    Rng rng(4);
    const Words pool{"春天", "来了", "我们", "其实", "此外", "a", "综上所述"};
    for (int trial = 0; trial < 200; ++trial) {
        const auto& a = pool[rng.below(pool.size())];
        const auto& b = pool[rng.below(pool.size())];
        const std::size_t expect = space.unigram_count() + reference_fnv1a(a + " " + b) % 65536;
        CHECK(space.bigram_index(a, b) == expect);
        CHECK(space_of({{"春天", "来了"}}, 65536).bigram_index(a, b) == expect);
    }
}

TEST_CASE("unigram and bucket ranges never collide over random corpora") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Words> corpus;
        for (std::size_t d = 0; d < 1 + rng.below(20); ++d) {
            Words w;
            for (std::size_t i = 0; i < 1 + rng.below(15); ++i) w.push_back("w" + std::to_string(rng.below(40)));
            corpus.push_back(w);
        }
        const auto space = space_of(corpus, 1 + rng.below(50));
        for (const auto& words : corpus) {
            const auto f = extract_features(words, space);
            for (std::size_t i = 0; i < f.size(); ++i) {
                const bool unigram = i < words.size();
                CHECK((f[i] < space.unigram_count()) == unigram);
                CHECK(f[i] < space.rows());
            }
        }
    }
}

TEST_CASE("forward: zero embeddings, duplicate invariance, oracle, normalization, empty input") {
    const auto space = space_of({{"a", "b", "c"}}, 11, 5);
    LinearModel m = LinearModel::initialize(space, 3);
    std::fill(m.embeddings.begin(), m.embeddings.end(), 0.0f);
    m.output_bias = {0.3f, -0.4f};
    const std::size_t feats[] = {1, 2, 5};
    const auto p = forward(feats, m);
    const double e0 = std::exp(double(0.3f)), e1 = std::exp(double(-0.4f));
    CHECK(p[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        LinearModel r = LinearModel::initialize(space, trial);
        for (float& w : r.output_weights) w = rng.normal(0.0f, 1.0f);
        for (float& w : r.embeddings) w = rng.normal(0.0f, 1.0f);
        r.output_bias = {rng.normal(0.0f, 1.0f), rng.normal(0.0f, 1.0f)};
        std::vector<std::size_t> f;
        for (std::size_t i = 0; i < 1 + rng.below(6); ++i) f.push_back(rng.below(space.rows()));
        // Naive oracle.
        double logits[2];
        for (int c = 0; c < 2; ++c) {
            double s = r.output_bias[c];
            for (std::size_t j = 0; j < r.dim; ++j) {
                double mean = 0;
                for (std::size_t idx : f) mean += r.embeddings[idx * r.dim + j];
                s += r.output_weights[c * r.dim + j] * (mean / f.size());
            }
            logits[c] = s;
        }
        const double q1 = 1.0 / (1.0 + std::exp(logits[0] - logits[1]));
        const auto got = forward(f, r);
        CHECK(std::abs(got[1] - q1) < 1e-6);
        CHECK(std::abs(got[0] + got[1] - 1.0) < 1e-6);
        auto doubled = f;
        doubled.insert(doubled.end(), f.begin(), f.end());
        const auto again = forward(doubled, r);
        CHECK(std::abs(again[1] - got[1]) < 1e-6);
    }
    CHECK_THROWS_AS(forward(std::vector<std::size_t>{}, m), Error);
}

TEST_CASE("permutations preserving unigram and bigram multisets give the same probabilities") {
    const auto space = space_of({{"a", "b", "c"}}, 31, 6);
    LinearModel m = LinearModel::initialize(space, 1);
    Rng rng(2);
    for (float& w : m.output_weights) w = rng.normal(0.0f, 1.0f);
    const auto p = forward(extract_features(Words{"a", "b", "a", "c", "a"}, space), m);
    const auto q = forward(extract_features(Words{"a", "c", "a", "b", "a"}, space), m);
    CHECK(std::abs(p[1] - q[1]) < 1e-7);
}

TEST_CASE("training: separable corpus, zero learning rate, determinism") {
    std::vector<Words> words;
    std::vector<TrainingExample> corpus;
    std::vector<Label> labels;
    for (int i = 0; i < 40; ++i) {
        const bool ai = i % 2 == 1;
        words.push_back({ai ? "算法" : "人工"});
        labels.push_back(ai ? Label::kAi : Label::kHuman);
    }
    const auto space = space_of(words, 16, 10);
    for (std::size_t i = 0; i < words.size(); ++i) corpus.push_back({extract_features(words[i], space), labels[i]});

    const LinearModel m = train(corpus, space, TrainSettings{5, 0.05f, 7});
    std::size_t correct = 0;
    for (const auto& ex : corpus) correct += predict(ex.features, m) == text::label_index(ex.label);
    CHECK(correct == corpus.size());

    const LinearModel init = LinearModel::initialize(space, derive_seed(7, "fasttext/init"));
    CHECK(train(corpus, space, TrainSettings{3, 0.0f, 7}) == init);
    CHECK(train(corpus, space, TrainSettings{5, 0.05f, 7}) == m);
    CHECK_FALSE(train(corpus, space, TrainSettings{5, 0.05f, 8}) == m);
}

TEST_CASE("hyperparameter search: degenerate grid, exhaustive re-evaluation, determinism") {
    Rng rng(12);
    const Words ai_markers{"此外", "综上所述", "显著"}, human_markers{"哈哈", "其实", "反正"},
        shared{"今天", "我们", "公园", "学习", "工作", "城市"};
    auto make = [&](std::size_t n, std::vector<Words>& w, std::vector<Label>& l) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool ai = rng.below(2) == 1;
            Words s;
            for (int k = 0; k < 6; ++k) s.push_back(shared[rng.below(shared.size())]);
            if (rng.uniform() < 0.8) {
                const auto& m = ai ? ai_markers : human_markers;
                s.insert(s.begin() + rng.below(s.size()), m[rng.below(m.size())]);
            }
            w.push_back(s);
            l.push_back(ai ? Label::kAi : Label::kHuman);
        }
    };
    std::vector<Words> tw, dw;
    std::vector<Label> tl, dl;
    make(200, tw, tl);
    make(60, dw, dl);

    SearchGrid one{{20}, {5}, {0.1f}};
    const auto single = hyperparameter_search(tw, tl, dw, dl, one, 1024, 3);
    CHECK(single.best.dim == 20);
    CHECK(single.best.epochs == 5);
    CHECK(single.best.lr0 == 0.1f);
    CHECK(single.evaluated.size() == 1);

    SearchGrid grid{{8, 16}, {1, 5}, {0.05f, 0.5f}};
    const auto result = hyperparameter_search(tw, tl, dw, dl, grid, 1024, 3);
    CHECK(result.evaluated.size() == 8);
    // Independent re-evaluation of every grid point.
    const auto space = FeatureSpace::build(tw, 1024, 8);
    std::vector<TrainingExample> train_set;
    for (std::size_t i = 0; i < tw.size(); ++i) train_set.push_back({extract_features(tw[i], space), tl[i]});
    std::vector<int> gold;
    for (auto l : dl) gold.push_back(text::label_index(l));
    double best_seen = -1.0;
    for (std::size_t d : grid.dims)
        for (std::size_t e : grid.epochs)
            for (float lr : grid.lrs) {
                const auto model = train(train_set, space.with_dim(d), TrainSettings{e, lr, 3});
                std::vector<int> preds;
                for (const auto& w : dw) preds.push_back(predict(extract_features(w, space), model));
                const double f1 = metrics::compute_metrics(preds, gold).macro.f1;
                CHECK(result.best.dev_macro_f1 >= f1);
                best_seen = std::max(best_seen, f1);
            }
    CHECK(result.best.dev_macro_f1 == best_seen);
    // Tie rule: the first grid point (ascending) that attains the best score.
    for (const auto& p : result.evaluated) {
        if (p.dev_macro_f1 == best_seen) {
            CHECK(p.dim == result.best.dim);
            CHECK(p.epochs == result.best.epochs);
            CHECK(p.lr0 == result.best.lr0);
            break;
        }
    }
    const auto again = hyperparameter_search(tw, tl, dw, dl, grid, 1024, 3);
    CHECK(again.model == result.model);
    CHECK(again.best.dev_macro_f1 == result.best.dev_macro_f1);
}

TEST_CASE("feature space json round trip") {
    const auto space = space_of({{"春天", "来了"}, {"我们"}}, 77, 9);
    const auto back = FeatureSpace::from_json(space.to_json());
    CHECK(back.to_json() == space.to_json());
    CHECK(back.word_index("我们") == space.word_index("我们"));
    CHECK_THROWS_AS(FeatureSpace({}, 0, 5, 0), ConfigError);
}
