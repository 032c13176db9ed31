// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>
#include <vector>

#include "aitd/error.hpp"
#include "aitd/harness.hpp"
#include "aitd/rng.hpp"
#include "aitd/synthetic.hpp"

using namespace aitd;
using namespace aitd::harness;

namespace {

/// Replays a fixed metric sequence, one value per evaluation.
class SequenceTrainee final : public Trainee {
public:
    SequenceTrainee(std::vector<double> values, Monitor monitor) : values_(std::move(values)), monitor_(monitor) {}

    double train_step(std::size_t) override {
        ++steps;
        return 0.0;
    }
    EvalSnapshot evaluate() override {
        REQUIRE(evals < values_.size());
        EvalSnapshot s;
        (monitor_ == Monitor::kMacroF1 ? s.macro_f1 : s.dev_loss) = values_[evals++];
        return s;
    }
    std::string checkpoint() const override { return "ckpt-" + std::to_string(evals); }

    std::size_t steps = 0;
    std::size_t evals = 0;

private:
    std::vector<double> values_;
    Monitor monitor_;
};

struct Expected {
    std::size_t evaluations;
    std::size_t best;
};

// Independent restatement: best(k) is the first argmax of the prefix; stop at
// the first k with k - best(k) >= patience.
Expected simulate(const std::vector<double>& v, std::size_t patience, bool higher_is_better) {
    std::size_t best = 1;
    for (std::size_t k = 1; k <= v.size(); ++k) {
        for (std::size_t j = 1; j <= k; ++j) {
            const bool better = higher_is_better ? v[j - 1] > v[best - 1] : v[j - 1] < v[best - 1];
            if (better) best = j;
        }
        if (k - best >= patience) return {k, best};
    }
    return {v.size(), best};
}

synthetic::SyntheticCorpus small_corpus(std::size_t count = 120) {
    synthetic::SyntheticSpec spec;
    spec.count = count;
    spec.seed = 77;
    return synthetic::generate(spec);
}

RunConfig tiny(std::string model) {
    RunConfig c;
    c.set("model", model);
    c.set("max_len", "64");
    c.set("batch_size", "4");
    c.set("max_steps", "6");
    c.set("eval_every", "3");
    for (const char* k : {"encoder.layers", "decoder.layers"}) c.set(k, "1");
    c.set("encoder.dim", "16");
    c.set("encoder.heads", "2");
    c.set("encoder.ffn_dim", "32");
    c.set("decoder.dim", "16");
    c.set("decoder.query_heads", "2");
    c.set("decoder.kv_heads", "1");
    c.set("decoder.head_dim", "8");
    c.set("decoder.ffn_dim", "32");
    c.set("decoder.rank", "2");
    c.set("decoder.pooling", "last");
    c.set("baseline.dim", "8");
    c.set("baseline.buckets", "256");
    c.set("baseline.epochs", "3");
    return c;
}

} // namespace

TEST_CASE("early stopping: injected sequence returns the second checkpoint") {
    SequenceTrainee t({0.5, 0.7, 0.6, 0.6, 0.6, 0.9, 0.9}, Monitor::kMacroF1);
    const auto r = train_with_early_stopping({100, 1, 3, Monitor::kMacroF1}, t);
    CHECK(r.history.size() == 5);
    CHECK(r.best_evaluation == 2);
    CHECK(r.best_checkpoint == "ckpt-2");
    CHECK(r.best.macro_f1 == 0.7);
    CHECK(r.stopped_early);
    CHECK(r.steps_run == 5);
}

TEST_CASE("early stopping: never improving and monotone sequences") {
    for (std::size_t patience : {1u, 2u, 5u}) {
        SequenceTrainee flat(std::vector<double>(20, 0.4), Monitor::kMacroF1);
        const auto r = train_with_early_stopping({100, 10, patience, Monitor::kMacroF1}, flat);
        // The first evaluation sets the reference; `patience` more fail to beat it.
        CHECK(r.history.size() == patience + 1);
        CHECK(r.best_evaluation == 1);
        CHECK(r.steps_run == 10 * (patience + 1));
    }
    std::vector<double> rising;
    for (int i = 0; i < 10; ++i) rising.push_back(0.1 * i);
    SequenceTrainee up(rising, Monitor::kMacroF1);
    const auto r = train_with_early_stopping({100, 10, 2, Monitor::kMacroF1}, up);
    CHECK(r.history.size() == 10);
    CHECK(r.best_evaluation == 10);
    CHECK(r.best_checkpoint == "ckpt-10");
    CHECK_FALSE(r.stopped_early);
    CHECK(r.steps_run == 100);
}

TEST_CASE("early stopping: loss monitor, final partial cadence, random sequences vs simulation") {
    SequenceTrainee losses({1.0, 0.8, 0.9, 0.7, 0.75}, Monitor::kDevLoss);
    const auto r = train_with_early_stopping({23, 5, 4, Monitor::kDevLoss}, losses);
    CHECK(r.history.size() == 5); // steps 5, 10, 15, 20, 23
    CHECK(r.history.back().step == 23);
    CHECK(r.best_evaluation == 4);
    CHECK(r.best_step == 20);

    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> v;
        for (std::size_t i = 0; i < 1 + rng.below(15); ++i) v.push_back(double(rng.below(6)) / 5.0);
        const std::size_t patience = 1 + rng.below(4);
        const bool f1 = rng.below(2) == 0;
        SequenceTrainee t(v, f1 ? Monitor::kMacroF1 : Monitor::kDevLoss);
        const auto got = train_with_early_stopping({v.size(), 1, patience, f1 ? Monitor::kMacroF1 : Monitor::kDevLoss}, t);
        const auto want = simulate(v, patience, f1);
        CHECK(got.history.size() == want.evaluations);
        CHECK(got.best_evaluation == want.best);
        // Never returns a checkpoint worse than any evaluated one.
        for (const auto& row : got.history) {
            if (f1) CHECK(got.best.macro_f1 >= row.dev_macro_f1);
            else CHECK(got.best.dev_loss <= row.dev_loss);
        }
    }
    SequenceTrainee t({0.1}, Monitor::kMacroF1);
    CHECK_THROWS_AS(train_with_early_stopping({10, 0, 1, Monitor::kMacroF1}, t), ConfigError);
    CHECK_THROWS_AS(train_with_early_stopping({10, 1, 0, Monitor::kMacroF1}, t), ConfigError);
}

TEST_CASE("history csv layout") {
    SequenceTrainee t({0.5, 0.7}, Monitor::kMacroF1);
    const auto r = train_with_early_stopping({2, 1, 3, Monitor::kMacroF1}, t);
    const auto csv = history_csv(r.history);
    CHECK(csv.rfind("evaluation,step,train_loss,dev_loss,dev_macro_f1,dev_accuracy,improved\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("run config: defaults, parsing, typing, json round trip") {
    const RunConfig defaults;
    CHECK(defaults.get_string("model") == "encoder");
    CHECK(defaults.get_size("patience") == 5);
    CHECK(defaults.get_size("eval_every") == 50);
    CHECK(defaults.get_string("decoder.pooling") == "first");
    CHECK(defaults.get_size("bin_width") == 50);
    CHECK(RunConfig::parse("").to_json() == defaults.to_json());

    const auto c = RunConfig::parse("# comment\nmodel = decoder\n\n decoder.rank=16  # trailing\nencoder.lr = 2e-3\n");
    CHECK(c.get_string("model") == "decoder");
    CHECK(c.get_size("decoder.rank") == 16);
    CHECK(c.get_float("encoder.lr") == 2e-3);
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK(RunConfig::parse(c.to_text()).to_json() == c.to_json());

    CHECK_THROWS_AS(RunConfig::parse("nonsense = 1"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("seed = abc"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("encoder.tied_head = yes"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("just words"), ConfigError);
    CHECK_THROWS_AS(defaults.get_int("model"), ConfigError);
}

TEST_CASE("rank list parsing") {
    CHECK(parse_ranks("4,8,16") == std::vector<std::size_t>{4, 8, 16});
    CHECK(parse_ranks(" 8 ") == std::vector<std::size_t>{8});
    CHECK_THROWS_AS(parse_ranks(""), ConfigError);
    CHECK_THROWS_AS(parse_ranks("4,x"), ConfigError);
    CHECK_THROWS_AS(parse_ranks("0"), ConfigError);
}

TEST_CASE("synthetic corpus: balanced, split sizes, deterministic, lexical signature") {
    const auto a = synthetic::generate({});
    const auto b = synthetic::generate({});
    REQUIRE(a.examples.size() == 2000);
    std::size_t ai = 0, counts[3] = {0, 0, 0};
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        const auto& ex = a.examples[i];
        ai += ex.label == text::Label::kAi;
        counts[static_cast<int>(ex.split)]++;
        ids.insert(ex.id);
        CHECK(ex.text == b.examples[i].text);
        CHECK(!ex.text.empty());
    }
    CHECK(ai == 1000);
    CHECK(counts[0] == 1600);
    CHECK(counts[1] == 200);
    CHECK(counts[2] == 200);
    CHECK(ids.size() == 2000);

    // AI markers appear far more often in AI texts.
    std::size_t in_ai = 0, in_human = 0;
    for (const auto& ex : a.examples) {
        for (const auto& w : text::segment_to_strings(ex.text, a.lexicon)) {
            for (auto m : synthetic::ai_markers()) {
                if (w == m) (ex.label == text::Label::kAi ? in_ai : in_human)++;
            }
        }
    }
    CHECK(in_ai > 10 * in_human);

    synthetic::SyntheticSpec other;
    other.seed = 1;
    CHECK(synthetic::generate(other).examples[0].text != a.examples[0].text);
    synthetic::SyntheticSpec bad;
    bad.max_words = 2;
    CHECK_THROWS_AS(synthetic::generate(bad), ConfigError);
}

TEST_CASE("dataset: vocabulary from train only, missing split, save/load round trip") {
    auto corpus = small_corpus();
    const auto data = Dataset::from_corpus(corpus.examples, corpus.lexicon);
    std::set<std::string> train_chars;
    for (const auto& ex : data.train) for (auto& c : text::utf8_chars(ex.text)) train_chars.insert(c);
    // Every vocabulary entry beyond specials and template characters comes from train.
    const auto base = text::Vocabulary::build({});
    for (std::size_t id = base.size(); id < data.vocab.size(); ++id) {
        CHECK(train_chars.count(data.vocab.token(static_cast<text::TokenId>(id))) == 1);
    }

    auto no_test = corpus.examples;
    std::erase_if(no_test, [](const auto& ex) { return ex.split == text::Split::kTest; });
    CHECK_THROWS_AS(Dataset::from_corpus(no_test, corpus.lexicon), Error);

    const auto dir = std::filesystem::temp_directory_path() / "aitd_test_dataset";
    std::filesystem::remove_all(dir);
    data.save(dir);
    const auto back = Dataset::load(dir);
    CHECK(back.vocab == data.vocab);
    CHECK(back.train.size() == data.train.size());
    CHECK(back.dev.size() == data.dev.size());
    CHECK(back.test.size() == data.test.size());
    CHECK(back.lexicon.sorted_words() == data.lexicon.sorted_words());
    std::filesystem::remove_all(dir);
}

TEST_CASE("every model kind trains, saves and reloads with identical scores") {
    auto corpus = small_corpus();
    const auto data = Dataset::from_corpus(corpus.examples, corpus.lexicon);
    for (const char* kind : {"encoder", "decoder", "baseline"}) {
        CAPTURE(kind);
        const auto cfg = tiny(kind);
        const auto out = train_model(cfg, data);
        REQUIRE_FALSE(out.result.best_checkpoint.empty());
        const auto model = load_classifier(parse_checkpoint(out.result.best_checkpoint));
        CHECK(model_kind_name(model->kind()) == kind);
        const auto report = evaluate(*model, data.dev);
        CHECK(report.examples.size() == data.dev.size());
        CHECK(report.accuracy == out.result.best.accuracy);
        CHECK(report.examples == out.result.best.report.examples);
        for (const auto& ex : data.test) {
            const auto p = model->predict(ex.text);
            CHECK(p.p_ai >= 0.0);
            CHECK(p.p_ai <= 1.0);
        }
        // Determinism.
        CHECK(train_model(cfg, data).result.best_checkpoint == out.result.best_checkpoint);
        if (std::string(kind) != "baseline") CHECK(model->vocab_fingerprint() == data.vocab.fingerprint());
    }
    RunConfig bad = tiny("encoder");
    bad.set("model", "svm");
    CHECK_THROWS_AS(train_model(bad, data), ConfigError);
}

TEST_CASE("rank sweep: one group per rank, deterministic, decoder only") {
    auto corpus = small_corpus(80);
    const auto data = Dataset::from_corpus(corpus.examples, corpus.lexicon);
    const auto cfg = tiny("decoder");
    const std::vector<std::size_t> ranks{2, 4};
    const auto sweep = rank_sweep(cfg, data, ranks, text::Split::kTest);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].first == "r2");
    CHECK(sweep[1].first == "r4");
    CHECK(sweep[0].second.total() == data.test.size());
    const std::vector<std::size_t> one{2};
    const auto again = rank_sweep(cfg, data, one, text::Split::kTest);
    REQUIRE(again.size() == 1);
    CHECK(again[0].second == sweep[0].second);
    CHECK_THROWS_AS(rank_sweep(tiny("encoder"), data, ranks, text::Split::kTest), ConfigError);
}

TEST_CASE("shipped configs parse; default.conf restates the built-in defaults") {
    const auto dir = std::filesystem::path(AITD_SOURCE_DIR) / "configs";
    CHECK(RunConfig::load(dir / "default.conf").to_json() == RunConfig().to_json());
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".conf") continue;
        CAPTURE(entry.path().string());
        const auto c = RunConfig::load(entry.path());
        CHECK_NOTHROW(early_stopping_from(c));
        ++n;
    }
    CHECK(n >= 4);
}
