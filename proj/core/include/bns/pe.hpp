#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bns::pe {

/// One parsed executable, reduced to exactly what feature extraction needs.
struct PeSummary {
  /// Fixed-width integer fields from the DOS, COFF and Optional headers plus
  /// the section table. Names are unique; per-section fields carry an index
  /// suffix ("virtual_size_0"). Always ends with ("parse_truncated", 0|1).
  std::vector<std::pair<std::string, std::int64_t>> numeric_fields;

  /// Import table as (dll, function) pairs in on-disk order. Imports by
  /// ordinal are rendered as "ord<N>".
  std::vector<std::pair<std::string, std::string>> imports;

  /// COFF TimeDateStamp, seconds since epoch. 0 when no COFF header was read.
  std::int64_t compile_timestamp = 0;

  /// True iff the MZ magic and a valid PE\0\0 signature were found.
  bool is_pe = false;
};

/// Parse raw bytes as a Portable Executable. Total over arbitrary input:
/// non-PE or malformed bytes degrade to a partial summary, never an error.
/// Truncated structures stop the walk at the last fully readable structure
/// and set the "parse_truncated" numeric field to 1.
PeSummary parse_pe(std::span<const std::uint8_t> raw);

/// The summary's import list; empty for non-PE input.
std::vector<std::pair<std::string, std::string>> extract_imports(
    const PeSummary& summary);

}  // namespace bns::pe
