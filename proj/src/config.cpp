// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aitd/error.hpp"

namespace aitd {

namespace {

using enum ValueType;

const std::vector<KeySpec> kSchema = {
    {"model", kString, "encoder", "encoder | decoder | baseline"},
    {"seed", kInt, "13", "master seed; every component derives its own stream"},
    {"max_len", kInt, "256", "token budget of a rendered prompt"},
    {"batch_size", kInt, "16", "examples per optimizer step"},
    {"max_steps", kInt, "500", "optimizer steps (encoder, decoder)"},
    {"eval_every", kInt, "50", "steps between dev evaluations"},
    {"patience", kInt, "5", "evaluations without improvement before stopping"},
    {"monitor", kString, "macro_f1", "macro_f1 | dev_loss"},
    {"weight_decay", kFloat, "0.01", "AdamW decoupled weight decay"},
    {"bin_width", kInt, "50", "error-length histogram bin width in characters"},
    {"eval_split", kString, "test", "split scored by sweep: dev | test"},

    {"encoder.layers", kInt, "4", ""},
    {"encoder.dim", kInt, "128", ""},
    {"encoder.heads", kInt, "4", ""},
    {"encoder.ffn_dim", kInt, "512", ""},
    {"encoder.dropout", kFloat, "0.1", ""},
    {"encoder.tied_head", kBool, "true", "share the token embedding with the MLM head"},
    {"encoder.lr", kFloat, "0.001", "fine-tuning learning rate"},
    {"encoder.pretrain_steps", kInt, "0", "whole-word-masking MLM steps on train texts"},
    {"encoder.pretrain_lr", kFloat, "0.001", ""},
    {"encoder.mask_rate", kFloat, "0.15", ""},

    {"decoder.layers", kInt, "4", ""},
    {"decoder.dim", kInt, "128", ""},
    {"decoder.query_heads", kInt, "4", ""},
    {"decoder.kv_heads", kInt, "2", ""},
    {"decoder.head_dim", kInt, "32", ""},
    {"decoder.ffn_dim", kInt, "384", ""},
    {"decoder.rope_base", kFloat, "10000", ""},
    {"decoder.qkv_bias", kBool, "true", ""},
    {"decoder.backbone_seed", kInt, "1", "seed of the frozen backbone initialisation"},
    {"decoder.pretrain_steps", kInt, "0", "next-token steps on train texts before adapters"},
    {"decoder.pretrain_lr", kFloat, "0.001", ""},
    {"decoder.rank", kInt, "8", "LoRA rank"},
    {"decoder.alpha", kFloat, "0", "LoRA alpha; 0 means alpha = rank"},
    {"decoder.lr", kFloat, "0.002", "adapter and head learning rate"},
    {"decoder.pooling", kString, "first", "first | last | mean"},
    {"decoder.ranks", kString, "4,8,16", "ranks visited by sweep"},

    {"baseline.dim", kInt, "100", ""},
    {"baseline.epochs", kInt, "5", ""},
    {"baseline.lr", kFloat, "0.05", "initial SGD rate, decays linearly to zero"},
    {"baseline.buckets", kInt, "65536", "hashed bigram buckets"},
    {"baseline.search", kBool, "false", "grid search dim/epochs/lr on dev first"},
};

const KeySpec& spec_of(std::string_view key) {
    for (const auto& s : kSchema) {
        if (s.key == key) {
            return s;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool parse_int(std::string_view s, std::int64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_float(std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_bool(std::string_view s, bool& out) {
    if (s == "true") {
        out = true;
    } else if (s == "false") {
        out = false;
    } else {
        return false;
    }
    return true;
}

} // namespace

const std::vector<KeySpec>& config_schema() { return kSchema; }

RunConfig::RunConfig() {
    for (const auto& s : kSchema) {
        values_.emplace(std::string(s.key), std::string(s.default_value));
    }
}

void RunConfig::set(std::string_view key, std::string_view value) {
    const KeySpec& s = spec_of(key);
    std::int64_t i = 0;
    double f = 0.0;
    bool b = false;
    bool ok = true;
    switch (s.type) {
    case kInt:
        ok = parse_int(value, i);
        break;
    case kFloat:
        ok = parse_float(value, f);
        break;
    case kBool:
        ok = parse_bool(value, b);
        break;
    case kString:
        break;
    }
    if (!ok) {
        throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
    }
    values_[std::string(key)] = std::string(value);
}

RunConfig RunConfig::parse(std::string_view text, std::string_view source) {
    RunConfig config;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (auto hash = v.find('#'); hash != std::string_view::npos) {
            v = v.substr(0, hash);
        }
        v = trim(v);
        if (v.empty()) {
            continue;
        }
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            config.set(trim(v.substr(0, eq)), trim(v.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

const std::string& RunConfig::raw(std::string_view key, ValueType expected) const {
    if (spec_of(key).type != expected) {
        throw ConfigError("config key '" + std::string(key) + "' read with the wrong type");
    }
    return values_.find(key)->second;
}

std::int64_t RunConfig::get_int(std::string_view key) const {
    std::int64_t v = 0;
    parse_int(raw(key, kInt), v);
    return v;
}

std::size_t RunConfig::get_size(std::string_view key) const {
    const auto v = get_int(key);
    if (v < 0) {
        throw ConfigError("config key '" + std::string(key) + "' must be non-negative");
    }
    return static_cast<std::size_t>(v);
}

double RunConfig::get_float(std::string_view key) const {
    double v = 0.0;
    parse_float(raw(key, kFloat), v);
    return v;
}

bool RunConfig::get_bool(std::string_view key) const {
    bool v = false;
    parse_bool(raw(key, kBool), v);
    return v;
}

const std::string& RunConfig::get_string(std::string_view key) const { return raw(key, kString); }

nlohmann::json RunConfig::to_json() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& s : kSchema) {
        switch (s.type) {
        case kInt:
            doc[std::string(s.key)] = get_int(s.key);
            break;
        case kFloat:
            doc[std::string(s.key)] = get_float(s.key);
            break;
        case kBool:
            doc[std::string(s.key)] = get_bool(s.key);
            break;
        case kString:
            doc[std::string(s.key)] = get_string(s.key);
            break;
        }
    }
    return doc;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw FormatError("run config: expected a JSON object");
    }
    RunConfig config;
    for (const auto& s : kSchema) {
        const auto it = doc.find(std::string(s.key));
        if (it == doc.end()) {
            throw FormatError("run config: missing key '" + std::string(s.key) + "'");
        }
        if (s.type == kString) {
            config.set(s.key, it->get<std::string>());
        } else {
            // dump() prints the shortest round-trip text for floats.
            config.set(s.key, it->dump());
        }
    }
    for (const auto& [key, value] : doc.items()) {
        spec_of(key);
    }
    return config;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& s : kSchema) {
        out += std::string(s.key) + " = " + values_.find(s.key)->second + "\n";
    }
    return out;
}

} // namespace aitd
