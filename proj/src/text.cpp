// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "aitd/error.hpp"

namespace aitd::text {

using nlohmann::json;

Label label_from_index(int value) {
    if (value != 0 && value != 1) {
        throw FormatError("label must be 0 or 1, got " + std::to_string(value));
    }
    return static_cast<Label>(value);
}

std::string_view split_name(Split split) {
    switch (split) {
    case Split::kTrain:
        return "train";
    case Split::kDev:
        return "dev";
    case Split::kTest:
        return "test";
    }
    return "train";
}

std::optional<Split> parse_split(std::string_view name) {
    if (name == "train") {
        return Split::kTrain;
    }
    if (name == "dev" || name == "validation") {
        return Split::kDev;
    }
    if (name == "test") {
        return Split::kTest;
    }
    return std::nullopt;
}

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

Label parse_label(const json& v, std::size_t line_no) {
    int value = -1;
    if (v.is_number_integer()) {
        value = v.get<int>();
    } else if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "0" || s == "1") {
            value = s[0] - '0';
        } else {
            throw FormatError("line " + std::to_string(line_no) + ": label must be 0 or 1, got \"" + s + "\"");
        }
    } else {
        throw FormatError("line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    if (value != 0 && value != 1) {
        throw FormatError("line " + std::to_string(line_no) + ": label must be 0 or 1, got " + std::to_string(value));
    }
    return static_cast<Label>(value);
}

} // namespace

std::vector<LabeledExample> parse_jsonl(std::istream& in, std::string_view source) {
    std::vector<LabeledExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        const std::string where = std::string(source) + ": line " + std::to_string(line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(where + ": malformed JSON");
        }
        if (!obj.is_object() || !obj.contains("text") || !obj.contains("label")) {
            throw FormatError(where + ": expected an object with \"text\" and \"label\"");
        }
        if (!obj["text"].is_string()) {
            throw FormatError(where + ": \"text\" must be a string");
        }
        LabeledExample ex;
        ex.text = obj["text"].get<std::string>();
        if (is_blank(ex.text)) {
            throw FormatError(where + ": empty text");
        }
        try {
            ex.label = parse_label(obj["label"], line_no);
        } catch (const FormatError& e) {
            throw FormatError(std::string(source) + ": " + e.what());
        }
        if (obj.contains("split")) {
            const auto& s = obj["split"];
            auto split = s.is_string() ? parse_split(s.get<std::string>()) : std::nullopt;
            if (!split) {
                throw FormatError(where + ": split must be train, dev or test");
            }
            ex.split = *split;
        }
        if (obj.contains("id")) {
            const auto& id = obj["id"];
            ex.id = id.is_string() ? id.get<std::string>() : id.dump();
        } else {
            ex.id = std::to_string(out.size());
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open corpus " + path.string());
    }
    return parse_jsonl(in, path.string());
}

void write_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    for (const auto& ex : examples) {
        json obj = {{"id", ex.id},
                    {"text", ex.text},
                    {"label", label_index(ex.label)},
                    {"split", std::string(split_name(ex.split))}};
        out << obj.dump() << '\n';
    }
}

std::vector<std::string> utf8_chars(std::string_view text) {
    std::vector<std::string> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        if (c < 0x80) {
            len = 1;
        } else if ((c >> 5) == 0x6) {
            len = 2;
        } else if ((c >> 4) == 0xe) {
            len = 3;
        } else if ((c >> 3) == 0x1e) {
            len = 4;
        }
        bool valid = len > 0 && i + len <= text.size();
        for (std::size_t k = 1; valid && k < len; ++k) {
            valid = (static_cast<unsigned char>(text[i + k]) >> 6) == 0x2;
        }
        if (!valid) {
            out.emplace_back("\xEF\xBF\xBD");
            ++i;
            continue;
        }
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    return out;
}

std::size_t utf8_length(std::string_view text) { return utf8_chars(text).size(); }

Vocabulary::Vocabulary() {
    for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) {
        add(s);
    }
}

Vocabulary Vocabulary::build(std::span<const LabeledExample> corpus) {
    Vocabulary v;
    for (std::string_view part : {kEncoderPromptPrefix, kEncoderPromptSuffix, kEncoderPromptClose, kDecoderInstruction,
                                  kHumanVerbalizer, kAiVerbalizer}) {
        for (const auto& ch : utf8_chars(part)) {
            v.add(ch);
        }
    }
    std::set<std::string> rest;
    for (const auto& ex : corpus) {
        for (auto& ch : utf8_chars(ex.text)) {
            if (!v.find(ch)) {
                rest.insert(std::move(ch));
            }
        }
    }
    for (const auto& ch : rest) {
        v.add(ch);
    }
    return v;
}

TokenId Vocabulary::add(std::string_view token) {
    if (auto id = find(token)) {
        return *id;
    }
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(token);
    ids_.emplace(tokens_.back(), id);
    return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw Error("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::fingerprint() const {
    std::string bytes;
    for (const auto& t : tokens_) {
        bytes += std::to_string(t.size());
        bytes += ':';
        bytes += t;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

json Vocabulary::to_json() const {
    return json{{"format", "aitd-vocab"}, {"fingerprint", fingerprint()}, {"tokens", tokens_}};
}

Vocabulary Vocabulary::from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array()) {
        throw FormatError("vocabulary document lacks a token array");
    }
    const auto tokens = doc["tokens"].get<std::vector<std::string>>();
    Vocabulary v;
    if (tokens.size() < kSpecialCount) {
        throw FormatError("vocabulary is missing the special tokens");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i < kSpecialCount) {
            if (tokens[i] != v.tokens_[i]) {
                throw FormatError("vocabulary special at id " + std::to_string(i) + " is \"" + tokens[i] + "\"");
            }
            continue;
        }
        if (v.find(tokens[i])) {
            throw FormatError("duplicate vocabulary token \"" + tokens[i] + "\"");
        }
        v.add(tokens[i]);
    }
    return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << to_json().dump(1) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open vocabulary " + path.string());
    }
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<TokenId> tokenize_chars(std::string_view text, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    for (const auto& ch : utf8_chars(text)) {
        ids.push_back(vocab.id_or_unk(ch));
    }
    return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : ids) {
        out += vocab.token(id);
    }
    return out;
}

void Lexicon::add(std::string_view word) {
    const std::size_t n = utf8_length(word);
    if (n < 2) {
        return;
    }
    words_.emplace(word);
    max_length_ = std::max(max_length_, n);
}

std::vector<std::string> Lexicon::sorted_words() const {
    std::vector<std::string> out(words_.begin(), words_.end());
    std::sort(out.begin(), out.end());
    return out;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open lexicon " + path.string());
    }
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
            line.pop_back();
        }
        std::size_t start = 0;
        while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) {
            ++start;
        }
        lex.add(std::string_view(line).substr(start));
    }
    return lex;
}

void Lexicon::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    for (const auto& w : sorted_words()) {
        out << w << '\n';
    }
}

std::vector<WordSpan> segment_words(std::string_view text, const Lexicon& lexicon) {
    const auto chars = utf8_chars(text);
    std::vector<WordSpan> spans;
    std::size_t i = 0;
    while (i < chars.size()) {
        std::size_t take = 1;
        const std::size_t longest = std::min(lexicon.max_length(), chars.size() - i);
        for (std::size_t len = longest; len >= 2; --len) {
            std::string candidate;
            for (std::size_t k = i; k < i + len; ++k) {
                candidate += chars[k];
            }
            if (lexicon.contains(candidate)) {
                take = len;
                break;
            }
        }
        spans.push_back({i, i + take});
        i += take;
    }
    return spans;
}

std::vector<std::string> segment_to_strings(std::string_view text, const Lexicon& lexicon) {
    const auto chars = utf8_chars(text);
    std::vector<std::string> words;
    for (const auto& s : segment_words(text, lexicon)) {
        std::string w;
        for (std::size_t k = s.begin; k < s.end; ++k) {
            w += chars[k];
        }
        words.push_back(std::move(w));
    }
    return words;
}

MaskedBatch whole_word_mask(std::span<const TokenId> tokens, std::span<const WordSpan> spans, double mask_rate,
                            Rng& rng) {
    if (mask_rate < 0.0 || mask_rate > 1.0) {
        throw ConfigError("mask rate must lie in [0, 1], got " + std::to_string(mask_rate));
    }
    std::size_t expected = 0;
    for (const auto& s : spans) {
        if (s.begin != expected || s.end <= s.begin) {
            throw ConfigError("word spans do not partition the token sequence");
        }
        expected = s.end;
    }
    if (expected != tokens.size()) {
        throw ConfigError("word spans cover " + std::to_string(expected) + " of " + std::to_string(tokens.size()) +
                          " tokens");
    }
    MaskedBatch batch;
    batch.input_ids.assign(tokens.begin(), tokens.end());
    for (const auto& s : spans) {
        bool special = false;
        for (std::size_t p = s.begin; p < s.end; ++p) {
            special = special || Vocabulary::is_special(tokens[p]);
        }
        if (special) {
            continue;
        }
        if (rng.uniform() < mask_rate) {
            for (std::size_t p = s.begin; p < s.end; ++p) {
                batch.positions.push_back(p);
                batch.targets.push_back(tokens[p]);
                batch.input_ids[p] = Vocabulary::kMask;
            }
        }
    }
    return batch;
}

std::size_t encoder_template_length() {
    // CLS + prefix + suffix + 2 masks + close + SEP
    return 1 + utf8_length(kEncoderPromptPrefix) + utf8_length(kEncoderPromptSuffix) + 2 +
           utf8_length(kEncoderPromptClose) + 1;
}

std::size_t decoder_instruction_length() { return utf8_length(kDecoderInstruction); }

EncoderPromptEncoding render_encoder_prompt(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
    const std::size_t fixed = encoder_template_length();
    if (max_len < fixed) {
        throw ConfigError("max length " + std::to_string(max_len) + " cannot hold the " + std::to_string(fixed) +
                          "-token encoder template");
    }
    auto payload = tokenize_chars(text, vocab);
    payload.resize(std::min(payload.size(), max_len - fixed));

    EncoderPromptEncoding enc;
    enc.ids.reserve(fixed + payload.size());
    enc.ids.push_back(Vocabulary::kCls);
    for (TokenId id : tokenize_chars(kEncoderPromptPrefix, vocab)) {
        enc.ids.push_back(id);
    }
    enc.ids.insert(enc.ids.end(), payload.begin(), payload.end());
    for (TokenId id : tokenize_chars(kEncoderPromptSuffix, vocab)) {
        enc.ids.push_back(id);
    }
    enc.mask_slots = {enc.ids.size(), enc.ids.size() + 1};
    enc.ids.push_back(Vocabulary::kMask);
    enc.ids.push_back(Vocabulary::kMask);
    for (TokenId id : tokenize_chars(kEncoderPromptClose, vocab)) {
        enc.ids.push_back(id);
    }
    enc.ids.push_back(Vocabulary::kSep);
    return enc;
}

std::vector<TokenId> render_decoder_prompt(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
    auto ids = tokenize_chars(kDecoderInstruction, vocab);
    if (max_len < ids.size()) {
        throw ConfigError("max length " + std::to_string(max_len) + " cannot hold the " + std::to_string(ids.size()) +
                          "-token instruction prefix");
    }
    auto payload = tokenize_chars(text, vocab);
    payload.resize(std::min(payload.size(), max_len - ids.size()));
    ids.insert(ids.end(), payload.begin(), payload.end());
    return ids;
}

} // namespace aitd::text
