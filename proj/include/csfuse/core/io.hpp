#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace csfuse::io {

/// Writes `bytes` to `path` via a sibling temporary file and rename, so readers
/// never observe a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for config hashes in run logs.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace csfuse::io
