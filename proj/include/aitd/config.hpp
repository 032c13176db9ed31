// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key/value run configuration.
//
// File syntax: one `key = value` per line, `#` starts a comment, blank lines
// are ignored. Every key has a typed default, so an empty file is valid.
// Unknown keys and malformed values are errors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aitd {

enum class ValueType : std::uint8_t { kInt, kFloat, kBool, kString };

struct KeySpec {
    std::string_view key;
    ValueType type;
    std::string_view default_value;
    std::string_view help;
};

/// Every recognised key, in documentation order.
const std::vector<KeySpec>& config_schema();

class RunConfig {
public:
    /// All defaults.
    RunConfig();

    static RunConfig parse(std::string_view text, std::string_view source = "<config>");
    static RunConfig load(const std::filesystem::path& path);
    /// Inverse of to_json(); every key must be present.
    static RunConfig from_json(const nlohmann::json& doc);

    /// Validates `value` against the key's type before storing it.
    void set(std::string_view key, std::string_view value);

    std::int64_t get_int(std::string_view key) const;
    std::size_t get_size(std::string_view key) const;
    double get_float(std::string_view key) const;
    bool get_bool(std::string_view key) const;
    const std::string& get_string(std::string_view key) const;

    /// Every key with its typed resolved value.
    nlohmann::json to_json() const;
    /// `key = value` lines in schema order.
    std::string to_text() const;

private:
    const std::string& raw(std::string_view key, ValueType expected) const;
    std::map<std::string, std::string, std::less<>> values_;
};

} // namespace aitd
