// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops with early stopping, checkpoint selection, per-family
// trainers, evaluation of saved models and the LoRA rank sweep.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aitd/checkpoint.hpp"
#include "aitd/config.hpp"
#include "aitd/metrics.hpp"
#include "aitd/text.hpp"

namespace aitd::harness {

enum class ModelKind : std::uint8_t { kEncoder, kDecoder, kBaseline };

std::string_view model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

enum class Monitor : std::uint8_t { kMacroF1, kDevLoss };

std::string_view monitor_name(Monitor monitor);
std::optional<Monitor> parse_monitor(std::string_view name);

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

struct EarlyStopping {
    std::size_t max_steps = 500;
    std::size_t eval_every = 50;
    std::size_t patience = 5;
    Monitor monitor = Monitor::kMacroF1;

    void validate() const;
};

struct EvalSnapshot {
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    double dev_loss = 0.0;
    metrics::EvalReport report;
};

/// Anything that can take a training step, be scored on dev and be saved.
class Trainee {
public:
    virtual ~Trainee() = default;
    /// `step` is zero-based. Returns the training loss of the step.
    virtual double train_step(std::size_t step) = 0;
    virtual EvalSnapshot evaluate() = 0;
    virtual std::string checkpoint() const = 0;
};

struct HistoryRow {
    std::size_t evaluation = 0; ///< 1-based
    std::size_t step = 0;       ///< steps completed when evaluated
    double train_loss = 0.0;    ///< mean over the steps since the last evaluation
    double dev_loss = 0.0;
    double dev_macro_f1 = 0.0;
    double dev_accuracy = 0.0;
    bool improved = false;
};

struct TrainResult {
    std::string best_checkpoint;
    std::size_t best_evaluation = 0; ///< 1-based
    std::size_t best_step = 0;
    EvalSnapshot best;
    std::vector<HistoryRow> history;
    std::size_t steps_run = 0;
    bool stopped_early = false;
};

/// Evaluates every `eval_every` steps and after the final step. The first
/// evaluation always counts as an improvement; later ones must be strictly
/// better. Training stops once `patience` consecutive evaluations fail to
/// improve, and the checkpoint of the best evaluation is returned.
TrainResult train_with_early_stopping(const EarlyStopping& rule, Trainee& trainee);

std::string history_csv(std::span<const HistoryRow> history);

// ---------------------------------------------------------------------------
// Data and trainers
// ---------------------------------------------------------------------------

struct Dataset {
    std::vector<text::LabeledExample> train;
    std::vector<text::LabeledExample> dev;
    std::vector<text::LabeledExample> test;
    text::Vocabulary vocab;
    text::Lexicon lexicon;

    const std::vector<text::LabeledExample>& split(text::Split s) const;

    /// Splits a labelled corpus and builds the vocabulary from train only.
    static Dataset from_corpus(std::span<const text::LabeledExample> corpus, text::Lexicon lexicon);
    /// Reads the layout written by save(): {train,dev,test}.jsonl, vocab.json
    /// and lexicon.txt.
    static Dataset load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;
};

std::unique_ptr<Trainee> make_trainee(const RunConfig& config, const Dataset& data);

EarlyStopping early_stopping_from(const RunConfig& config);

struct TrainOutcome {
    TrainResult result;
    /// Per-evaluation history as CSV.
    std::string history;
};

TrainOutcome train_model(const RunConfig& config, const Dataset& data);

// ---------------------------------------------------------------------------
// Saved models
// ---------------------------------------------------------------------------

struct Prediction {
    int label = 0;
    double p_ai = 0.5;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual ModelKind kind() const = 0;
    virtual Prediction predict(std::string_view text) const = 0;
    /// Fingerprint of the token vocabulary, empty for the baseline.
    virtual std::string vocab_fingerprint() const = 0;
};

std::unique_ptr<Classifier> load_classifier(const Checkpoint& checkpoint);

metrics::EvalReport evaluate(const Classifier& classifier, std::span<const text::LabeledExample> examples);

/// One decoder run per rank with identical seeds and data; each best
/// checkpoint is scored on `split`. Groups are labelled "r<rank>".
std::vector<std::pair<std::string, metrics::EvalReport>> rank_sweep(const RunConfig& config, const Dataset& data,
                                                                    std::span<const std::size_t> ranks,
                                                                    text::Split split);

std::vector<std::size_t> parse_ranks(std::string_view list);

} // namespace aitd::harness
