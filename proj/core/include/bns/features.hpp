#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bns/pe.hpp"

namespace bns::features {

inline constexpr std::size_t kBlockSize = 256;
inline constexpr std::size_t kNumBlocks = 4;
inline constexpr std::size_t kVectorSize = kBlockSize * kNumBlocks;  // 1024
inline constexpr std::size_t kEntropyWindowSize = 1024;
inline constexpr std::size_t kEntropyWindowStep = 256;
inline constexpr std::size_t kMinStringRun = 5;

/// The four 256-wide blocks, in vector order.
enum class Block : std::size_t {
  kByteEntropy = 0,
  kImports = 1,
  kMetadata = 2,
  kStrings = 3,
};

constexpr std::array<std::string_view, kNumBlocks> kBlockNames = {
    "byte-entropy", "imports", "metadata", "strings"};

std::optional<Block> block_from_name(std::string_view name);

/// 1024 log-transformed feature values in block order
/// [byte-entropy | imports | metadata | strings].
struct FeatureVector {
  std::array<double, kVectorSize> values{};
};

/// Base-2 Shannon entropy of a byte window, in [0, 8] bits.
/// Throws std::domain_error on an empty window.
double window_entropy(std::span<const std::uint8_t> window);

/// 16x16 byte/entropy histogram, row-major over entropy rows
/// (flat[entropy_bin * 16 + byte_bin]). A 1024-byte window slides in steps
/// of 256; every byte occurrence in a window is paired with that window's
/// entropy. Files shorter than one window use a single whole-file window.
std::array<std::uint64_t, kBlockSize> byte_entropy_features(
    std::span<const std::uint8_t> raw);

/// Counts of (dll, function) pairs hashed into 256 bins. DLL names are
/// lowercased before hashing; function names are case-preserved.
std::array<std::uint64_t, kBlockSize> import_features(
    const std::vector<std::pair<std::string, std::string>>& imports);

/// Header field values accumulated into 256 bins keyed by field-name hash.
/// Negative values clamp to 0 so the block stays non-negative.
std::array<double, kBlockSize> metadata_features(
    const std::vector<std::pair<std::string, std::int64_t>>& numeric_fields);

/// Counts of maximal printable-ASCII runs (length >= 5) hashed into 256 bins.
std::array<std::uint64_t, kBlockSize> string_features(
    std::span<const std::uint8_t> raw);

/// Concatenate the four blocks and apply x -> log10(1 + x) elementwise.
FeatureVector assemble_features(std::span<const std::uint8_t> raw,
                                const pe::PeSummary& summary);

}  // namespace bns::features
