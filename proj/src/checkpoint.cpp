// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aitd/error.hpp"

namespace aitd {

namespace {

constexpr char kMagic[4] = {'A', 'I', 'T', 'D'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
    }
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::string_view take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("checkpoint truncated while reading ") + what);
        }
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32(const char* what) {
        auto s = take(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        }
        return v;
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

const TensorRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& r : records) {
        if (r.name == name) {
            return &r;
        }
    }
    return nullptr;
}

const TensorRecord& Checkpoint::at(const std::string& name) const {
    if (const auto* r = find(name)) {
        return *r;
    }
    throw FormatError("checkpoint has no record named '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    std::string out(kMagic, 4);
    put_u32(out, checkpoint.version);
    put_u32(out, static_cast<std::uint32_t>(checkpoint.config_document.size()));
    out += checkpoint.config_document;
    for (const auto& r : checkpoint.records) {
        if (shape_numel(r.shape) != r.values.size()) {
            throw ShapeError("record '" + r.name + "' holds " + std::to_string(r.values.size()) +
                             " values for shape " + shape_string(r.shape));
        }
        put_u32(out, static_cast<std::uint32_t>(r.name.size()));
        out += r.name;
        put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
        for (std::size_t d : r.shape) {
            put_u32(out, static_cast<std::uint32_t>(d));
        }
        for (float v : r.values) {
            put_f32(out, v);
        }
    }
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
        throw FormatError("not a checkpoint: bad magic bytes");
    }
    Checkpoint ck;
    ck.version = in.u32("version");
    if (ck.version != Checkpoint::kFormatVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(ck.version) + " (expected " +
                          std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    const std::uint32_t doc_len = in.u32("config length");
    ck.config_document = std::string(in.take(doc_len, "config document"));
    while (!in.done()) {
        TensorRecord r;
        const std::uint32_t name_len = in.u32("record name length");
        r.name = std::string(in.take(name_len, "record name"));
        const std::uint32_t rank = in.u32("record rank");
        for (std::uint32_t i = 0; i < rank; ++i) {
            r.shape.push_back(in.u32("record dims"));
        }
        const std::size_t n = shape_numel(r.shape);
        r.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            r.values[i] = std::bit_cast<float>(in.u32("record payload"));
        }
        ck.records.push_back(std::move(r));
    }
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    const std::string bytes = serialize_checkpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open checkpoint " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

std::vector<TensorRecord> records_from(const ParameterStore& store) {
    std::vector<TensorRecord> out;
    out.reserve(store.all().size());
    for (const auto& p : store.all()) {
        out.push_back(TensorRecord{p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
    }
    return out;
}

void load_into(ParameterStore& store, const Checkpoint& checkpoint) {
    for (auto& p : store.all()) {
        const auto& r = checkpoint.at(p.name);
        if (r.shape != p.tensor.shape()) {
            throw ShapeError("record '" + p.name + "' has shape " + shape_string(r.shape) + ", model expects " +
                             shape_string(p.tensor.shape()));
        }
        std::copy(r.values.begin(), r.values.end(), p.tensor.data().begin());
    }
}

} // namespace aitd
