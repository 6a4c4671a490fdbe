#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajdiff {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 of the compact dump of `manifest` with any top-level "timing" key removed.
/// Keys are dumped in sorted order, so the hash depends only on content.
std::string manifest_hash(const json& manifest);

json read_json(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_json(const std::filesystem::path& path, const json& value);

template <typename T>
void write_binary(const std::filesystem::path& path, std::span<const T> values);

/// Appends to an open file image; used for multi-section blobs.
template <typename T>
void append_bytes(std::vector<std::byte>& out, std::span<const T> values)
{
    const auto* p = reinterpret_cast<const std::byte*>(values.data());
    out.insert(out.end(), p, p + values.size_bytes());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::vector<std::byte> read_bytes(const std::filesystem::path& path);

/// Copies `count` elements of T starting at byte `offset`. Throws FormatError when short.
template <typename T>
std::vector<T> take(std::span<const std::byte> bytes, std::size_t offset, std::size_t count);

}  // namespace trajdiff
