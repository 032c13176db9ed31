// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aitd/decoder.hpp"
#include "aitd/encoder.hpp"
#include "aitd/error.hpp"
#include "aitd/fasttext.hpp"
#include "aitd/optim.hpp"
#include "aitd/rng.hpp"

namespace aitd::harness {

using nlohmann::json;
using text::Label;
using text::LabeledExample;

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::kEncoder:
        return "encoder";
    case ModelKind::kDecoder:
        return "decoder";
    case ModelKind::kBaseline:
        return "baseline";
    }
    return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::kEncoder, ModelKind::kDecoder, ModelKind::kBaseline}) {
        if (model_kind_name(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::string_view monitor_name(Monitor monitor) { return monitor == Monitor::kMacroF1 ? "macro_f1" : "dev_loss"; }

std::optional<Monitor> parse_monitor(std::string_view name) {
    if (name == "macro_f1") {
        return Monitor::kMacroF1;
    }
    if (name == "dev_loss") {
        return Monitor::kDevLoss;
    }
    return std::nullopt;
}

void EarlyStopping::validate() const {
    if (max_steps == 0 || eval_every == 0 || patience == 0) {
        throw ConfigError("early stopping: max_steps, eval_every and patience must be at least 1");
    }
}

TrainResult train_with_early_stopping(const EarlyStopping& rule, Trainee& trainee) {
    rule.validate();
    TrainResult result;
    std::size_t without_improvement = 0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t step = 0; step < rule.max_steps; ++step) {
        loss_sum += trainee.train_step(step);
        ++loss_count;
        result.steps_run = step + 1;
        if ((step + 1) % rule.eval_every != 0 && step + 1 != rule.max_steps) {
            continue;
        }
        EvalSnapshot snap = trainee.evaluate();
        HistoryRow row;
        row.evaluation = result.history.size() + 1;
        row.step = step + 1;
        row.train_loss = loss_sum / static_cast<double>(loss_count);
        row.dev_loss = snap.dev_loss;
        row.dev_macro_f1 = snap.macro_f1;
        row.dev_accuracy = snap.accuracy;
        loss_sum = 0.0;
        loss_count = 0;
        row.improved = result.history.empty() ||
                       (rule.monitor == Monitor::kMacroF1 ? snap.macro_f1 > result.best.macro_f1
                                                          : snap.dev_loss < result.best.dev_loss);
        result.history.push_back(row);
        if (row.improved) {
            result.best = std::move(snap);
            result.best_checkpoint = trainee.checkpoint();
            result.best_evaluation = row.evaluation;
            result.best_step = row.step;
            without_improvement = 0;
        } else if (++without_improvement >= rule.patience) {
            result.stopped_early = step + 1 < rule.max_steps;
            break;
        }
    }
    return result;
}

std::string history_csv(std::span<const HistoryRow> history) {
    std::string out = "evaluation,step,train_loss,dev_loss,dev_macro_f1,dev_accuracy,improved\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", r.evaluation, r.step, r.train_loss,
                      r.dev_loss, r.dev_macro_f1, r.dev_accuracy, r.improved ? 1 : 0);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

const std::vector<LabeledExample>& Dataset::split(text::Split s) const {
    switch (s) {
    case text::Split::kTrain:
        return train;
    case text::Split::kDev:
        return dev;
    case text::Split::kTest:
        return test;
    }
    return train;
}

Dataset Dataset::from_corpus(std::span<const LabeledExample> corpus, text::Lexicon lexicon) {
    Dataset d;
    for (const auto& ex : corpus) {
        switch (ex.split) {
        case text::Split::kTrain:
            d.train.push_back(ex);
            break;
        case text::Split::kDev:
            d.dev.push_back(ex);
            break;
        case text::Split::kTest:
            d.test.push_back(ex);
            break;
        }
    }
    for (auto s : {text::Split::kTrain, text::Split::kDev, text::Split::kTest}) {
        if (d.split(s).empty()) {
            throw Error("corpus has no " + std::string(text::split_name(s)) + " examples");
        }
    }
    d.vocab = text::Vocabulary::build(d.train);
    d.lexicon = std::move(lexicon);
    return d;
}

Dataset Dataset::load(const std::filesystem::path& dir) {
    Dataset d;
    d.train = text::load_jsonl(dir / "train.jsonl");
    d.dev = text::load_jsonl(dir / "dev.jsonl");
    d.test = text::load_jsonl(dir / "test.jsonl");
    d.vocab = text::Vocabulary::load(dir / "vocab.json");
    if (std::filesystem::exists(dir / "lexicon.txt")) {
        d.lexicon = text::Lexicon::load(dir / "lexicon.txt");
    }
    return d;
}

void Dataset::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    text::write_jsonl(dir / "train.jsonl", train);
    text::write_jsonl(dir / "dev.jsonl", dev);
    text::write_jsonl(dir / "test.jsonl", test);
    vocab.save(dir / "vocab.json");
    lexicon.save(dir / "lexicon.txt");
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kFormat = "aitd-model";

/// Cycles through a seeded permutation, reshuffling on every pass.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
        if (n == 0) {
            throw Error("training split is empty");
        }
        std::iota(order_.begin(), order_.end(), 0);
        rng_.shuffle(std::span(order_));
    }

    std::vector<std::size_t> next(std::size_t count) {
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (cursor_ == order_.size()) {
                rng_.shuffle(std::span(order_));
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

struct Scored {
    int pred = 0;
    double p_ai = 0.5;
    double loss = 0.0;
};

double nll(double p_ai, Label gold) {
    const double p = gold == Label::kAi ? p_ai : 1.0 - p_ai;
    return -std::log(std::max(p, 1e-12));
}

template <typename Score>
EvalSnapshot score_split(std::span<const LabeledExample> examples, Score&& score) {
    if (examples.empty()) {
        throw Error("evaluation split is empty");
    }
    std::vector<metrics::ExampleRecord> records;
    records.reserve(examples.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const Scored s = score(i);
        loss += s.loss;
        records.push_back({examples[i].id, text::label_index(examples[i].label), s.pred,
                           text::utf8_length(examples[i].text), s.p_ai});
    }
    EvalSnapshot snap;
    snap.report = metrics::compute_metrics(std::move(records));
    snap.macro_f1 = snap.report.macro.f1;
    snap.accuracy = snap.report.accuracy;
    snap.dev_loss = loss / static_cast<double>(examples.size());
    return snap;
}

AdamW make_adamw(double lr, const RunConfig& config) {
    AdamWConfig c;
    c.lr = static_cast<float>(lr);
    c.weight_decay = static_cast<float>(config.get_float("weight_decay"));
    return AdamW(c);
}

std::vector<Label> labels_of(std::span<const LabeledExample> examples) {
    std::vector<Label> out;
    for (const auto& ex : examples) {
        out.push_back(ex.label);
    }
    return out;
}

std::string pack(json doc, std::vector<TensorRecord> records) {
    doc["format"] = kFormat;
    Checkpoint ckpt;
    ckpt.config_document = doc.dump();
    ckpt.records = std::move(records);
    return serialize_checkpoint(ckpt);
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

encoder::EncoderConfig encoder_config(const RunConfig& c, const text::Vocabulary& vocab) {
    encoder::EncoderConfig e;
    e.layers = c.get_size("encoder.layers");
    e.dim = c.get_size("encoder.dim");
    e.heads = c.get_size("encoder.heads");
    e.ffn_dim = c.get_size("encoder.ffn_dim");
    e.dropout = static_cast<float>(c.get_float("encoder.dropout"));
    e.tied_head = c.get_bool("encoder.tied_head");
    e.vocab_size = vocab.size();
    e.max_positions = c.get_size("max_len");
    e.validate();
    return e;
}

Scored score_encoder(const encoder::EncoderModel& model, const encoder::VerbalizerPair& pair,
                     const text::EncoderPromptEncoding& prompt, std::optional<Label> gold) {
    NoGradGuard guard;
    const Tensor logits = encoder::slot_logits(model, prompt);
    const auto p = encoder::predict_verbalizer(logits, pair);
    Scored s{text::label_index(p.label), p.p_ai, 0.0};
    if (gold) {
        s.loss = encoder::verbalizer_loss(logits, *gold, pair).item();
    }
    return s;
}

class EncoderTrainee final : public Trainee {
public:
    EncoderTrainee(const RunConfig& c, const Dataset& d)
        : data_(d),
          seed_(static_cast<std::uint64_t>(c.get_int("seed"))),
          max_len_(c.get_size("max_len")),
          batch_(c.get_size("batch_size")),
          model_(encoder_config(c, d.vocab), derive_seed(seed_, "encoder/init")),
          pair_(encoder::VerbalizerPair::from_vocab(d.vocab)),
          optimizer_(make_adamw(c.get_float("encoder.lr"), c)),
          sampler_(d.train.size(), derive_seed(seed_, "encoder/batches")),
          dropout_(derive_seed(seed_, "encoder/dropout")) {
        for (const auto& ex : d.train) {
            train_prompts_.push_back(text::render_encoder_prompt(ex.text, d.vocab, max_len_));
        }
        for (const auto& ex : d.dev) {
            dev_prompts_.push_back(text::render_encoder_prompt(ex.text, d.vocab, max_len_));
        }
        train_labels_ = labels_of(d.train);
        pretrain(c);
    }

    double train_step(std::size_t) override {
        std::vector<text::EncoderPromptEncoding> prompts;
        std::vector<Label> labels;
        for (std::size_t i : sampler_.next(batch_)) {
            prompts.push_back(train_prompts_[i]);
            labels.push_back(train_labels_[i]);
        }
        return encoder::finetune_step(model_, prompts, labels, pair_, optimizer_, &dropout_);
    }

    EvalSnapshot evaluate() override {
        return score_split(data_.dev, [&](std::size_t i) {
            return score_encoder(model_, pair_, dev_prompts_[i], data_.dev[i].label);
        });
    }

    std::string checkpoint() const override {
        json doc{{"kind", "encoder"},
                 {"config", model_.config().to_json()},
                 {"vocab", data_.vocab.to_json()},
                 {"max_len", max_len_}};
        return pack(std::move(doc), records_from(model_.params()));
    }

private:
    void pretrain(const RunConfig& c) {
        const std::size_t steps = c.get_size("encoder.pretrain_steps");
        if (steps == 0) {
            return;
        }
        AdamW opt = make_adamw(c.get_float("encoder.pretrain_lr"), c);
        const double rate = c.get_float("encoder.mask_rate");
        BatchSampler sampler(data_.train.size(), derive_seed(seed_, "encoder/mlm/batches"));
        Rng mask_rng(derive_seed(seed_, "encoder/mlm/mask"));
        Rng drop(derive_seed(seed_, "encoder/mlm/dropout"));
        for (std::size_t step = 0; step < steps; ++step) {
            std::vector<text::MaskedBatch> batch;
            for (std::size_t i : sampler.next(batch_)) {
                const auto& t = data_.train[i].text;
                auto ids = text::tokenize_chars(t, data_.vocab);
                auto spans = text::segment_words(t, data_.lexicon);
                if (ids.size() > max_len_) {
                    ids.resize(max_len_);
                    std::erase_if(spans, [&](const text::WordSpan& s) { return s.end > max_len_; });
                }
                auto masked = text::whole_word_mask(ids, spans, rate, mask_rng);
                if (!masked.positions.empty()) {
                    batch.push_back(std::move(masked));
                }
            }
            if (!batch.empty()) {
                encoder::pretrain_mlm_step(model_, batch, opt, &drop);
            }
        }
    }

    const Dataset& data_;
    std::uint64_t seed_;
    std::size_t max_len_;
    std::size_t batch_;
    encoder::EncoderModel model_;
    encoder::VerbalizerPair pair_;
    AdamW optimizer_;
    BatchSampler sampler_;
    Rng dropout_;
    std::vector<text::EncoderPromptEncoding> train_prompts_;
    std::vector<text::EncoderPromptEncoding> dev_prompts_;
    std::vector<Label> train_labels_;
};

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

decoder::DecoderConfig decoder_config(const RunConfig& c, const text::Vocabulary& vocab) {
    decoder::DecoderConfig d;
    d.layers = c.get_size("decoder.layers");
    d.dim = c.get_size("decoder.dim");
    d.query_heads = c.get_size("decoder.query_heads");
    d.kv_heads = c.get_size("decoder.kv_heads");
    d.head_dim = c.get_size("decoder.head_dim");
    d.ffn_dim = c.get_size("decoder.ffn_dim");
    d.rope_base = static_cast<float>(c.get_float("decoder.rope_base"));
    d.qkv_bias = c.get_bool("decoder.qkv_bias");
    d.vocab_size = vocab.size();
    d.max_positions = c.get_size("max_len");
    d.validate();
    return d;
}

decoder::Pooling pooling_of(const RunConfig& c) {
    const auto p = decoder::parse_pooling(c.get_string("decoder.pooling"));
    if (!p) {
        throw ConfigError("unknown pooling '" + c.get_string("decoder.pooling") + "' (first | last | mean)");
    }
    return *p;
}

Scored score_decoder(const decoder::DecoderModel& model, decoder::Pooling pooling,
                     std::span<const text::TokenId> ids, std::optional<Label> gold) {
    NoGradGuard guard;
    const double p_ai = decoder::ai_probability(model.classify(ids, pooling));
    Scored s{p_ai > 0.5 ? 1 : 0, p_ai, 0.0};
    if (gold) {
        s.loss = nll(p_ai, *gold);
    }
    return s;
}

class DecoderTrainee final : public Trainee {
public:
    DecoderTrainee(const RunConfig& c, const Dataset& d)
        : data_(d),
          seed_(static_cast<std::uint64_t>(c.get_int("seed"))),
          max_len_(c.get_size("max_len")),
          batch_(c.get_size("batch_size")),
          pooling_(pooling_of(c)),
          model_(decoder_config(c, d.vocab),
                 derive_seed(static_cast<std::uint64_t>(c.get_int("decoder.backbone_seed")), "decoder/backbone")),
          optimizer_(make_adamw(c.get_float("decoder.lr"), c)),
          sampler_(d.train.size(), derive_seed(seed_, "decoder/batches")) {
        for (const auto& ex : d.train) {
            train_inputs_.push_back(text::render_decoder_prompt(ex.text, d.vocab, max_len_));
        }
        for (const auto& ex : d.dev) {
            dev_inputs_.push_back(text::render_decoder_prompt(ex.text, d.vocab, max_len_));
        }
        train_labels_ = labels_of(d.train);
        pretrain(c);
        decoder::LoraSettings lora;
        lora.rank = c.get_size("decoder.rank");
        lora.alpha = static_cast<float>(c.get_float("decoder.alpha"));
        model_.inject_lora(lora, derive_seed(seed_, "decoder/lora"));
    }

    double train_step(std::size_t) override {
        std::vector<std::vector<text::TokenId>> inputs;
        std::vector<Label> labels;
        for (std::size_t i : sampler_.next(batch_)) {
            inputs.push_back(train_inputs_[i]);
            labels.push_back(train_labels_[i]);
        }
        return decoder::finetune_step(model_, inputs, labels, pooling_, optimizer_);
    }

    EvalSnapshot evaluate() override {
        return score_split(data_.dev, [&](std::size_t i) {
            return score_decoder(model_, pooling_, dev_inputs_[i], data_.dev[i].label);
        });
    }

    std::string checkpoint() const override {
        const auto& lora = *model_.lora();
        json doc{{"kind", "decoder"},
                 {"config", model_.config().to_json()},
                 {"vocab", data_.vocab.to_json()},
                 {"max_len", max_len_},
                 {"pooling", decoder::pooling_name(pooling_)},
                 {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha}}}};
        return pack(std::move(doc), records_from(model_.params()));
    }

private:
    /// Stand-in for a pretrained backbone: next-token training on train texts.
    void pretrain(const RunConfig& c) {
        const std::size_t steps = c.get_size("decoder.pretrain_steps");
        if (steps == 0) {
            return;
        }
        AdamW opt = make_adamw(c.get_float("decoder.pretrain_lr"), c);
        BatchSampler sampler(data_.train.size(), derive_seed(seed_, "decoder/lm/batches"));
        for (std::size_t step = 0; step < steps; ++step) {
            std::vector<std::vector<text::TokenId>> seqs;
            for (std::size_t i : sampler.next(batch_)) {
                auto ids = text::tokenize_chars(data_.train[i].text, data_.vocab);
                if (ids.size() > max_len_) {
                    ids.resize(max_len_);
                }
                if (ids.size() >= 2) {
                    seqs.push_back(std::move(ids));
                }
            }
            if (!seqs.empty()) {
                decoder::pretrain_lm_step(model_, seqs, opt);
            }
        }
    }

    const Dataset& data_;
    std::uint64_t seed_;
    std::size_t max_len_;
    std::size_t batch_;
    decoder::Pooling pooling_;
    decoder::DecoderModel model_;
    AdamW optimizer_;
    BatchSampler sampler_;
    std::vector<std::vector<text::TokenId>> train_inputs_;
    std::vector<std::vector<text::TokenId>> dev_inputs_;
    std::vector<Label> train_labels_;
};

// ---------------------------------------------------------------------------
// Baseline
// ---------------------------------------------------------------------------

Scored score_baseline(const fasttext::LinearModel& model, std::span<const std::size_t> features,
                      std::optional<Label> gold) {
    Scored s;
    if (!features.empty()) {
        const auto p = fasttext::forward(features, model);
        s.p_ai = p[1];
        s.pred = p[1] > p[0] ? 1 : 0;
    }
    if (gold) {
        s.loss = nll(s.p_ai, *gold);
    }
    return s;
}

std::vector<TensorRecord> baseline_records(const fasttext::LinearModel& m) {
    return {{"embeddings", {m.rows, m.dim}, m.embeddings},
            {"output.weight", {2, m.dim}, m.output_weights},
            {"output.bias", {2}, {m.output_bias[0], m.output_bias[1]}}};
}

class BaselineTrainee final : public Trainee {
public:
    BaselineTrainee(const RunConfig& c, const Dataset& d)
        : data_(d),
          seed_(static_cast<std::uint64_t>(c.get_int("seed"))),
          epochs_(c.get_size("baseline.epochs")),
          lr_(static_cast<float>(c.get_float("baseline.lr"))) {
        std::vector<std::vector<std::string>> train_words, dev_words;
        for (const auto& ex : d.train) {
            train_words.push_back(text::segment_to_strings(ex.text, d.lexicon));
        }
        for (const auto& ex : d.dev) {
            dev_words.push_back(text::segment_to_strings(ex.text, d.lexicon));
        }
        const std::size_t buckets = c.get_size("baseline.buckets");
        std::size_t dim = c.get_size("baseline.dim");
        if (c.get_bool("baseline.search")) {
            const auto found = fasttext::hyperparameter_search(train_words, labels_of(d.train), dev_words,
                                                               labels_of(d.dev), {}, buckets, seed_);
            dim = found.best.dim;
            epochs_ = found.best.epochs;
            lr_ = found.best.lr0;
        }
        space_ = fasttext::FeatureSpace::build(train_words, buckets, dim);
        for (std::size_t i = 0; i < train_words.size(); ++i) {
            corpus_.push_back({fasttext::extract_features(train_words[i], space_), d.train[i].label});
        }
        for (const auto& w : dev_words) {
            dev_features_.push_back(fasttext::extract_features(w, space_));
        }
        model_ = fasttext::LinearModel::initialize(space_, derive_seed(seed_, "fasttext/init"));
    }

    std::size_t epochs() const { return epochs_; }

    double train_step(std::size_t step) override {
        fasttext::train_epoch(model_, corpus_, step, epochs_, lr_, seed_);
        double loss = 0.0;
        for (const auto& ex : corpus_) {
            loss += score_baseline(model_, ex.features, ex.label).loss;
        }
        return loss / static_cast<double>(corpus_.size());
    }

    EvalSnapshot evaluate() override {
        return score_split(data_.dev, [&](std::size_t i) {
            return score_baseline(model_, dev_features_[i], data_.dev[i].label);
        });
    }

    std::string checkpoint() const override {
        json doc{{"kind", "baseline"},
                 {"feature_space", space_.to_json()},
                 {"lexicon", data_.lexicon.sorted_words()},
                 {"epochs", epochs_},
                 {"lr", lr_}};
        return pack(std::move(doc), baseline_records(model_));
    }

private:
    const Dataset& data_;
    std::uint64_t seed_;
    std::size_t epochs_;
    float lr_;
    fasttext::FeatureSpace space_;
    std::vector<fasttext::TrainingExample> corpus_;
    std::vector<std::vector<std::size_t>> dev_features_;
    fasttext::LinearModel model_;
};

ModelKind kind_of(const RunConfig& c) {
    const auto k = parse_model_kind(c.get_string("model"));
    if (!k) {
        throw ConfigError("unknown model kind '" + c.get_string("model") + "' (encoder | decoder | baseline)");
    }
    return *k;
}

// ---------------------------------------------------------------------------
// Loaded classifiers
// ---------------------------------------------------------------------------

class EncoderClassifier final : public Classifier {
public:
    EncoderClassifier(const json& doc, const Checkpoint& ckpt)
        : vocab_(text::Vocabulary::from_json(doc.at("vocab"))),
          model_(encoder::EncoderConfig::from_json(doc.at("config")), 0),
          pair_(encoder::VerbalizerPair::from_vocab(vocab_)),
          max_len_(doc.at("max_len").get<std::size_t>()) {
        load_into(model_.params(), ckpt);
    }
    ModelKind kind() const override { return ModelKind::kEncoder; }
    std::string vocab_fingerprint() const override { return vocab_.fingerprint(); }
    Prediction predict(std::string_view t) const override {
        const auto s = score_encoder(model_, pair_, text::render_encoder_prompt(t, vocab_, max_len_), std::nullopt);
        return {s.pred, s.p_ai};
    }

private:
    text::Vocabulary vocab_;
    encoder::EncoderModel model_;
    encoder::VerbalizerPair pair_;
    std::size_t max_len_;
};

class DecoderClassifier final : public Classifier {
public:
    DecoderClassifier(const json& doc, const Checkpoint& ckpt)
        : vocab_(text::Vocabulary::from_json(doc.at("vocab"))),
          model_(decoder::DecoderConfig::from_json(doc.at("config")), 0),
          max_len_(doc.at("max_len").get<std::size_t>()) {
        const auto p = decoder::parse_pooling(doc.at("pooling").get<std::string>());
        if (!p) {
            throw FormatError("checkpoint: unknown pooling");
        }
        pooling_ = *p;
        if (auto it = doc.find("lora"); it != doc.end() && !it->is_null()) {
            decoder::LoraSettings lora;
            lora.rank = it->at("rank").get<std::size_t>();
            lora.alpha = it->at("alpha").get<float>();
            model_.inject_lora(lora, 0);
        }
        load_into(model_.params(), ckpt);
    }
    ModelKind kind() const override { return ModelKind::kDecoder; }
    std::string vocab_fingerprint() const override { return vocab_.fingerprint(); }
    Prediction predict(std::string_view t) const override {
        const auto s = score_decoder(model_, pooling_, text::render_decoder_prompt(t, vocab_, max_len_), std::nullopt);
        return {s.pred, s.p_ai};
    }

private:
    text::Vocabulary vocab_;
    decoder::DecoderModel model_;
    decoder::Pooling pooling_ = decoder::Pooling::kFirst;
    std::size_t max_len_;
};

class BaselineClassifier final : public Classifier {
public:
    BaselineClassifier(const json& doc, const Checkpoint& ckpt)
        : space_(fasttext::FeatureSpace::from_json(doc.at("feature_space"))) {
        for (const auto& w : doc.at("lexicon")) {
            lexicon_.add(w.get<std::string>());
        }
        model_ = fasttext::LinearModel::initialize(space_, 0);
        const auto& emb = ckpt.at("embeddings");
        const auto& w = ckpt.at("output.weight");
        const auto& b = ckpt.at("output.bias");
        if (emb.values.size() != model_.embeddings.size() || w.values.size() != model_.output_weights.size() ||
            b.values.size() != 2) {
            throw ShapeError("checkpoint: baseline tensors do not match the feature space");
        }
        model_.embeddings = emb.values;
        model_.output_weights = w.values;
        model_.output_bias = {b.values[0], b.values[1]};
    }
    ModelKind kind() const override { return ModelKind::kBaseline; }
    std::string vocab_fingerprint() const override { return {}; }
    Prediction predict(std::string_view t) const override {
        const auto words = text::segment_to_strings(t, lexicon_);
        const auto s = score_baseline(model_, fasttext::extract_features(words, space_), std::nullopt);
        return {s.pred, s.p_ai};
    }

private:
    fasttext::FeatureSpace space_;
    text::Lexicon lexicon_;
    fasttext::LinearModel model_;
};

} // namespace

std::unique_ptr<Trainee> make_trainee(const RunConfig& config, const Dataset& data) {
    if (data.train.empty() || data.dev.empty()) {
        throw Error("training needs non-empty train and dev splits");
    }
    switch (kind_of(config)) {
    case ModelKind::kEncoder:
        return std::make_unique<EncoderTrainee>(config, data);
    case ModelKind::kDecoder:
        return std::make_unique<DecoderTrainee>(config, data);
    case ModelKind::kBaseline:
        return std::make_unique<BaselineTrainee>(config, data);
    }
    return nullptr;
}

EarlyStopping early_stopping_from(const RunConfig& config) {
    EarlyStopping rule;
    rule.max_steps = config.get_size("max_steps");
    rule.eval_every = config.get_size("eval_every");
    rule.patience = config.get_size("patience");
    const auto m = parse_monitor(config.get_string("monitor"));
    if (!m) {
        throw ConfigError("unknown monitor '" + config.get_string("monitor") + "' (macro_f1 | dev_loss)");
    }
    rule.monitor = *m;
    if (kind_of(config) == ModelKind::kBaseline) {
        // One step is one epoch; evaluate after each.
        rule.max_steps = config.get_size("baseline.epochs");
        rule.eval_every = 1;
    }
    rule.validate();
    return rule;
}

TrainOutcome train_model(const RunConfig& config, const Dataset& data) {
    EarlyStopping rule = early_stopping_from(config);
    auto trainee = make_trainee(config, data);
    if (auto* b = dynamic_cast<BaselineTrainee*>(trainee.get())) {
        rule.max_steps = b->epochs();
    }
    TrainOutcome out;
    out.result = train_with_early_stopping(rule, *trainee);
    out.history = history_csv(out.result.history);
    return out;
}

std::unique_ptr<Classifier> load_classifier(const Checkpoint& checkpoint) {
    json doc;
    try {
        doc = json::parse(checkpoint.config_document);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint config document: ") + e.what());
    }
    if (doc.value("format", "") != kFormat) {
        throw FormatError("checkpoint is not an aitd model");
    }
    try {
        const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
        if (!kind) {
            throw FormatError("checkpoint: unknown model kind " + doc.at("kind").dump());
        }
        switch (*kind) {
        case ModelKind::kEncoder:
            return std::make_unique<EncoderClassifier>(doc, checkpoint);
        case ModelKind::kDecoder:
            return std::make_unique<DecoderClassifier>(doc, checkpoint);
        case ModelKind::kBaseline:
            return std::make_unique<BaselineClassifier>(doc, checkpoint);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint config document: ") + e.what());
    }
    return nullptr;
}

metrics::EvalReport evaluate(const Classifier& classifier, std::span<const LabeledExample> examples) {
    return score_split(examples,
                       [&](std::size_t i) {
                           const auto p = classifier.predict(examples[i].text);
                           return Scored{p.label, p.p_ai, nll(p.p_ai, examples[i].label)};
                       })
        .report;
}

std::vector<std::pair<std::string, metrics::EvalReport>> rank_sweep(const RunConfig& config, const Dataset& data,
                                                                    std::span<const std::size_t> ranks,
                                                                    text::Split split) {
    if (kind_of(config) != ModelKind::kDecoder) {
        throw ConfigError("rank sweep needs model = decoder");
    }
    if (ranks.empty()) {
        throw ConfigError("rank sweep needs at least one rank");
    }
    std::vector<std::pair<std::string, metrics::EvalReport>> out;
    for (std::size_t r : ranks) {
        RunConfig run = config;
        run.set("decoder.rank", std::to_string(r));
        const auto trained = train_model(run, data);
        const auto model = load_classifier(parse_checkpoint(trained.result.best_checkpoint));
        out.emplace_back("r" + std::to_string(r), evaluate(*model, data.split(split)));
    }
    return out;
}

std::vector<std::size_t> parse_ranks(std::string_view list) {
    std::vector<std::size_t> out;
    while (!list.empty()) {
        const auto comma = list.find(',');
        std::string_view item = list.substr(0, comma);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size() || v == 0) {
            throw ConfigError("bad rank '" + std::string(item) + "' in list");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) {
            break;
        }
        list.remove_prefix(comma + 1);
    }
    if (out.empty()) {
        throw ConfigError("empty rank list");
    }
    return out;
}

} // namespace aitd::harness
