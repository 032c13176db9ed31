// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary classification metrics (human = 0, AI = 1), error-length analysis,
// and report serialization to CSV, JSON and SVG.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace aitd::metrics {

inline constexpr std::array<const char*, 2> kClassNames{"human", "ai"};

/// Rows are gold labels, columns are predictions.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 2>, 2> counts{};
    std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    /// Set when the corresponding denominator was zero and the value was
    /// defined as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
    bool operator==(const ClassScores&) const = default;
};

struct Averages {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool operator==(const Averages&) const = default;
};

struct ExampleRecord {
    std::string id;
    int gold = 0;
    int pred = 0;
    /// Text length in characters.
    std::size_t length = 0;
    double p_ai = 0.0;
    bool operator==(const ExampleRecord&) const = default;
};

struct EvalReport {
    std::array<ClassScores, 2> classes{};
    double accuracy = 0.0;
    Averages macro;
    Averages weighted;
    ConfusionMatrix confusion;
    std::vector<ExampleRecord> examples;

    std::size_t total() const { return confusion.total(); }
    bool operator==(const EvalReport&) const = default;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& doc);
};

/// F1 = 2PR/(P+R), or 0 when P+R = 0.
double f1_score(double precision, double recall);

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> golds);

/// Scores derived from a confusion matrix; examples left empty.
EvalReport report_from_confusion(const ConfusionMatrix& confusion);

/// Throws on length mismatch, empty input, or labels outside {0, 1}.
EvalReport compute_metrics(std::span<const int> preds, std::span<const int> golds);

/// Metrics over per-example records, which are kept in the report.
EvalReport compute_metrics(std::vector<ExampleRecord> records);

struct ErrorLengthHistogram {
    std::size_t bin_width = 50;
    /// Bin i covers lengths [i * bin_width, (i + 1) * bin_width).
    std::vector<std::size_t> errors;
    std::vector<std::size_t> totals;

    double error_rate(std::size_t bin) const;
    nlohmann::json to_json() const;
};

/// Buckets the report's examples by character length. Throws if bin_width
/// is zero.
ErrorLengthHistogram error_length_histogram(const EvalReport& report, std::size_t bin_width = 50);

/// One CSV with header `group,row,precision,recall,f1,support`; per group the
/// rows are human, ai, accuracy, macro avg, weighted avg. Values use 17
/// significant digits so parsing restores them exactly.
std::string reports_to_csv(const std::vector<std::pair<std::string, EvalReport>>& groups);

/// Inverse of reports_to_csv. Confusion counts are rebuilt from recall and
/// support; per-example records are not part of the CSV.
std::vector<std::pair<std::string, EvalReport>> reports_from_csv(const std::string& csv);

std::string confusion_svg(const EvalReport& report, const std::string& title);
std::string histogram_svg(const ErrorLengthHistogram& histogram, const std::string& title);

} // namespace aitd::metrics
