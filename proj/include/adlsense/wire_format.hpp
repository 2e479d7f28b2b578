#pragma once

// Tensor container shared by feature bundles and fusion weights:
//   line 1   JSON header {"format", "version", "tensors":[{"name","dtype","shape"}...], ...}
//   payload  raw little-endian row-major f32 values, tensors in header order
//   trailer  optional single JSON line (feature bundles carry detections here)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/tensor.hpp"

namespace adlsense::wire {

inline constexpr int kVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
};

struct TensorFile {
    nlohmann::json header;                 // without the "tensors" array
    std::vector<NamedTensor> tensors;      // header order
    std::optional<nlohmann::json> trailer;

    const Tensor<float>& get(const std::string& name) const {
        for (const auto& t : tensors) {
            if (t.name == name) return t.tensor;
        }
        throw ShapeError("tensor \"" + name + "\" missing from file");
    }
};

namespace detail {

inline void append_f32(std::string& out, float v) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline float read_f32(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

inline std::string encode(const std::string& format, nlohmann::json header,
                          const std::vector<NamedTensor>& tensors,
                          const std::optional<nlohmann::json>& trailer = std::nullopt) {
    header["format"] = format;
    header["version"] = kVersion;
    nlohmann::json descs = nlohmann::json::array();
    std::size_t total = 0;
    for (const auto& t : tensors) {
        descs.push_back({{"name", t.name}, {"dtype", "f32"}, {"shape", t.tensor.shape()}});
        total += t.tensor.size();
    }
    header["tensors"] = std::move(descs);
    std::string out = header.dump();
    out.push_back('\n');
    out.reserve(out.size() + 4 * total + 64);
    for (const auto& t : tensors) {
        for (float v : t.tensor.data()) detail::append_f32(out, v);
    }
    if (trailer) {
        out += trailer->dump();
        out.push_back('\n');
    }
    return out;
}

// Parses a container. `expect_trailer` controls whether bytes after the
// payload are required (a trailer line) or forbidden.
inline TensorFile decode(const std::string& bytes, const std::string& format, bool expect_trailer) {
    const auto newline = bytes.find('\n');
    if (newline == std::string::npos) {
        throw TruncationError(bytes.size() + 1, bytes.size(), "header line is not terminated");
    }
    TensorFile file;
    try {
        file.header = nlohmann::json::parse(bytes.substr(0, newline));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(1, std::string("header: ") + e.what());
    }
    if (!file.header.is_object() || file.header.value("format", "") != format) {
        throw VersionError("expected format \"" + format + "\", found \"" +
                           (file.header.is_object() ? file.header.value("format", "") : "") + "\"");
    }
    const int version = file.header.value("version", -1);
    if (version != kVersion) {
        throw VersionError(format + " version " + std::to_string(version) +
                           " not supported (expected " + std::to_string(kVersion) + ")");
    }
    if (!file.header.contains("tensors") || !file.header["tensors"].is_array()) {
        throw ParseError(1, "header has no tensors array");
    }

    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t offset = newline + 1;
    for (const auto& desc : file.header["tensors"]) {
        const auto name = desc.at("name").get<std::string>();
        if (desc.value("dtype", "") != "f32") {
            throw ShapeError("tensor \"" + name + "\": unsupported dtype " +
                             desc.value("dtype", std::string("?")));
        }
        Shape shape = desc.at("shape").get<Shape>();
        const std::size_t count = shape_volume(shape);
        const std::size_t end = offset + 4 * count;
        if (end > bytes.size()) {
            throw TruncationError(end, bytes.size(), "tensor \"" + name + "\" is truncated at byte " +
                                                         std::to_string(offset));
        }
        std::vector<float> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = detail::read_f32(base + offset + 4 * i);
        file.tensors.push_back({name, Tensor<float>(std::move(shape), std::move(values))});
        offset = end;
    }
    file.header.erase("tensors");

    if (expect_trailer) {
        const auto end = bytes.find('\n', offset);
        if (offset >= bytes.size() || end == std::string::npos) {
            throw TruncationError(offset + 1, bytes.size(), "trailer record missing after payload");
        }
        try {
            file.trailer = nlohmann::json::parse(bytes.substr(offset, end - offset));
        } catch (const nlohmann::json::parse_error& e) {
            throw CorruptionError("header/payload length mismatch: trailer at byte " +
                                  std::to_string(offset) + " does not parse (" + e.what() + ")");
        }
        offset = end + 1;
    }
    if (offset != bytes.size()) {
        throw CorruptionError("header/payload length mismatch: header accounts for " +
                              std::to_string(offset) + " bytes, file has " +
                              std::to_string(bytes.size()));
    }
    return file;
}

// Compares the shapes a header declares against the expected ones before any
// payload accounting, so a wrong shape is reported as such rather than as a
// length mismatch. Header parse problems are left to decode().
inline void require_declared_shapes(const std::string& bytes,
                                    const std::vector<std::pair<std::string, Shape>>& expected) {
    const auto newline = bytes.find('\n');
    if (newline == std::string::npos) return;
    const auto header = nlohmann::json::parse(bytes.substr(0, newline), nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("tensors")) return;
    for (const auto& [name, shape] : expected) {
        bool found = false;
        for (const auto& desc : header["tensors"]) {
            if (!desc.is_object() || desc.value("name", "") != name) continue;
            found = true;
            const Shape declared = desc.value("shape", Shape{});
            if (declared != shape) {
                throw ShapeError("shape mismatch for \"" + name + "\": expected " +
                                 shape_string(shape) + ", found " + shape_string(declared));
            }
        }
        if (!found) throw ShapeError("tensor \"" + name + "\" missing from header");
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace adlsense::wire
