// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aitd/optim.hpp"
#include "aitd/tensor.hpp"

namespace aitd {

/// Checkpoint container layout (all integers little-endian):
///
///   "AITD" | u32 version | u32 doc_len | doc_len bytes of UTF-8 config
///   then, until end of file, one record per parameter:
///   u32 name_len | name bytes | u32 rank | rank x u32 dims | float32 payload
struct TensorRecord {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint32_t version = kFormatVersion;
    std::string config_document;
    std::vector<TensorRecord> records;

    const TensorRecord* find(const std::string& name) const;
    const TensorRecord& at(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Records for every parameter in registration order.
std::vector<TensorRecord> records_from(const ParameterStore& store);

/// Copies record values into the matching parameters. Every parameter must
/// have a record of identical shape.
void load_into(ParameterStore& store, const Checkpoint& checkpoint);

} // namespace aitd
