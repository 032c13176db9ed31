// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic corpus in which AI-labelled texts carry a lexical
// signature.
//
// Every text is a sequence of min_words..max_words words. Each word is drawn
// independently: with probability `own_marker_rate` from the marker list of
// its own class, with probability `other_marker_rate` from the other class's
// list, and otherwise from a shared pool. AI markers are formal connectives
// (此外, 综上所述, 值得注意的是, ...); human markers are colloquial
// (哈哈, 我觉得, 其实, ...). Labels alternate before shuffling, so the corpus
// is exactly balanced, and the shuffled corpus is cut into train/dev/test.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aitd/text.hpp"

namespace aitd::synthetic {

struct SyntheticSpec {
    std::size_t count = 2000;
    double train_fraction = 0.8;
    double dev_fraction = 0.1;
    std::size_t min_words = 10;
    std::size_t max_words = 16;
    double own_marker_rate = 0.4;
    double other_marker_rate = 0.02;
    std::uint64_t seed = 2025;
};

struct SyntheticCorpus {
    std::vector<text::LabeledExample> examples;
    /// Every multi-character word the generator can emit.
    text::Lexicon lexicon;
};

std::span<const std::string_view> ai_markers();
std::span<const std::string_view> human_markers();
std::span<const std::string_view> shared_words();

SyntheticCorpus generate(const SyntheticSpec& spec);

} // namespace aitd::synthetic
