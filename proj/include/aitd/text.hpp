// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "aitd/rng.hpp"

namespace aitd::text {

using TokenId = int;

enum class Label : std::uint8_t {
    kHuman = 0,
    kAi = 1,
};

inline int label_index(Label l) { return static_cast<int>(l); }
Label label_from_index(int value);

enum class Split : std::uint8_t { kTrain, kDev, kTest };

std::string_view split_name(Split split);
/// Accepts train | dev | test (and "validation" for dev).
std::optional<Split> parse_split(std::string_view name);

struct LabeledExample {
    std::string id;
    std::string text;
    Label label = Label::kHuman;
    Split split = Split::kTrain;
};

/// One JSON object per line with "text" and "label" (0 or 1); optional
/// "split" (default train) and "id" (default: zero-based line index).
/// Blank lines are skipped.
std::vector<LabeledExample> parse_jsonl(std::istream& in, std::string_view source = "<stream>");
std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> examples);

/// Splits UTF-8 into one string per Unicode scalar. Invalid bytes become
/// U+FFFD.
std::vector<std::string> utf8_chars(std::string_view text);
std::size_t utf8_length(std::string_view text);

// Prompt templates and verbalizers.
inline constexpr std::string_view kEncoderPromptPrefix =
    "下面的文本可能由人工撰写,也可能由算法生成.请判断这段文本的来源:文本:'";
inline constexpr std::string_view kEncoderPromptSuffix = "'.答案是:";
inline constexpr std::string_view kEncoderPromptClose = ".";
inline constexpr std::string_view kDecoderInstruction = "判断下面的文本是否为 AI 生成（0 = 人写，1 = AI）：";
inline constexpr std::string_view kHumanVerbalizer = "人工";
inline constexpr std::string_view kAiVerbalizer = "算法";

/// Token string <-> id bijection. Ids 0-4 are always the specials.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kCls = 2;
    static constexpr TokenId kSep = 3;
    static constexpr TokenId kMask = 4;
    static constexpr std::size_t kSpecialCount = 5;

    /// Specials only.
    Vocabulary();

    /// Specials, then every character of the prompt templates and
    /// verbalizers, then the remaining characters of `corpus` in code point
    /// order.
    static Vocabulary build(std::span<const LabeledExample> corpus);

    TokenId add(std::string_view token);
    std::optional<TokenId> find(std::string_view token) const;
    TokenId id_or_unk(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const { return tokens_.size(); }
    static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kSpecialCount); }

    /// Stable 64-bit content hash, rendered as 16 hex digits.
    std::string fingerprint() const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

/// One id per Unicode scalar; unknown characters map to UNK.
std::vector<TokenId> tokenize_chars(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

/// Set of multi-character words used by the segmenter.
class Lexicon {
public:
    Lexicon() = default;
    /// Single-character entries are ignored.
    void add(std::string_view word);
    bool contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }
    std::size_t size() const { return words_.size(); }
    std::size_t max_length() const { return max_length_; }
    std::vector<std::string> sorted_words() const;

    /// UTF-8 text, one entry per line.
    static Lexicon load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::unordered_set<std::string> words_;
    std::size_t max_length_ = 0;
};

/// Half-open range of character (Unicode scalar) indices.
struct WordSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const WordSpan&) const = default;
};

/// Greedy left-to-right longest match against the lexicon; characters that
/// start no match become single-character words. Spans partition the text.
std::vector<WordSpan> segment_words(std::string_view text, const Lexicon& lexicon);
std::vector<std::string> segment_to_strings(std::string_view text, const Lexicon& lexicon);

struct MaskedBatch {
    std::vector<TokenId> input_ids;
    /// Ascending masked positions.
    std::vector<std::size_t> positions;
    /// Original token at each masked position.
    std::vector<TokenId> targets;
};

/// Whole-word masking. One uniform draw per word that contains no special
/// token, in span order; a word is selected when the draw is < mask_rate and
/// then every one of its positions becomes MASK.
MaskedBatch whole_word_mask(std::span<const TokenId> tokens, std::span<const WordSpan> spans, double mask_rate,
                            Rng& rng);

struct EncoderPromptEncoding {
    std::vector<TokenId> ids;
    std::array<std::size_t, 2> mask_slots{};
    std::size_t length() const { return ids.size(); }
};

/// Number of tokens the encoder template occupies with an empty payload.
std::size_t encoder_template_length();
std::size_t decoder_instruction_length();

/// [CLS] prefix 'payload'.答案是:[MASK][MASK].[SEP]
/// The payload keeps its head and loses its tail when the encoding would
/// exceed max_len; template tokens are never dropped.
EncoderPromptEncoding render_encoder_prompt(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

/// Instruction prefix followed by the payload, tail-truncated to max_len.
std::vector<TokenId> render_decoder_prompt(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

} // namespace aitd::text
