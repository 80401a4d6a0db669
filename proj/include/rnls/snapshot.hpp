#pragma once

#include <filesystem>

#include "rnls/field.hpp"

namespace rnls {

/// Binary field snapshot: "RNLS", u32 version, u32 dim, u32 n, f64 L, then
/// n^dim interleaved (re, im) f64 pairs, all little-endian, row-major.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(const std::filesystem::path& path, const Field& field);
Field read_snapshot(const std::filesystem::path& path);

}  // namespace rnls
