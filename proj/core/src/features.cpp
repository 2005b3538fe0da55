#include "bns/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "bns/fnv.hpp"

namespace bns::features {
namespace {

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool printable_ascii(std::uint8_t b) { return b >= 0x20 && b <= 0x7e; }

double entropy_of_counts(const std::array<std::uint32_t, 256>& counts,
                         std::size_t total) {
  double entropy = 0.0;
  const double n = static_cast<double>(total);
  for (std::uint32_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    entropy -= p * std::log2(p);
  }
  // Rounding can push the sum a hair outside [0, 8].
  return std::clamp(entropy, 0.0, 8.0);
}

std::size_t entropy_bin(double entropy) {
  // 16 even bins over [0, 8]; the closed right edge folds into bin 15.
  auto bin = static_cast<std::size_t>(entropy * 2.0);
  return std::min<std::size_t>(bin, 15);
}

void accumulate_window(const std::array<std::uint32_t, 256>& counts,
                       std::size_t window_length,
                       std::array<std::uint64_t, kBlockSize>& histogram) {
  std::size_t row = entropy_bin(
      entropy_of_counts(counts, window_length));
  // Each byte occurrence pairs with the window entropy; occurrences of the
  // same value land in the same cell, so add per-value counts directly.
  for (std::size_t value = 0; value < 256; ++value) {
    if (counts[value] != 0) {
      histogram[row * 16 + (value >> 4)] += counts[value];
    }
  }
}

}  // namespace

std::optional<Block> block_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kBlockNames.size(); ++i) {
    if (kBlockNames[i] == name) return static_cast<Block>(i);
  }
  return std::nullopt;
}

double window_entropy(std::span<const std::uint8_t> window) {
  if (window.empty()) {
    throw std::domain_error("window_entropy: empty window");
  }
  std::array<std::uint32_t, 256> counts{};
  for (std::uint8_t b : window) ++counts[b];
  return entropy_of_counts(counts, window.size());
}

std::array<std::uint64_t, kBlockSize> byte_entropy_features(
    std::span<const std::uint8_t> raw) {
  std::array<std::uint64_t, kBlockSize> histogram{};
  if (raw.empty()) return histogram;

  if (raw.size() < kEntropyWindowSize) {
    // One window spanning the whole file.
    std::array<std::uint32_t, 256> counts{};
    for (std::uint8_t b : raw) ++counts[b];
    accumulate_window(counts, raw.size(), histogram);
    return histogram;
  }

  // Slide with a rolling count table; a trailing partial window is ignored.
  std::array<std::uint32_t, 256> counts{};
  for (std::size_t i = 0; i < kEntropyWindowSize; ++i) ++counts[raw[i]];
  accumulate_window(counts, kEntropyWindowSize, histogram);
  for (std::size_t offset = kEntropyWindowStep;
       offset + kEntropyWindowSize <= raw.size();
       offset += kEntropyWindowStep) {
    for (std::size_t i = offset - kEntropyWindowStep; i < offset; ++i) {
      --counts[raw[i]];
    }
    for (std::size_t i = offset + kEntropyWindowSize - kEntropyWindowStep;
         i < offset + kEntropyWindowSize; ++i) {
      ++counts[raw[i]];
    }
    accumulate_window(counts, kEntropyWindowSize, histogram);
  }
  return histogram;
}

std::array<std::uint64_t, kBlockSize> import_features(
    const std::vector<std::pair<std::string, std::string>>& imports) {
  std::array<std::uint64_t, kBlockSize> bins{};
  for (const auto& [dll, function] : imports) {
    std::string key = lowercase_ascii(dll) + ":" + function;
    ++bins[fnv1a64(key) % kBlockSize];
  }
  return bins;
}

std::array<double, kBlockSize> metadata_features(
    const std::vector<std::pair<std::string, std::int64_t>>& numeric_fields) {
  std::array<double, kBlockSize> bins{};
  for (const auto& [name, value] : numeric_fields) {
    bins[fnv1a64(name) % kBlockSize] +=
        static_cast<double>(std::max<std::int64_t>(value, 0));
  }
  return bins;
}

std::array<std::uint64_t, kBlockSize> string_features(
    std::span<const std::uint8_t> raw) {
  std::array<std::uint64_t, kBlockSize> bins{};
  std::size_t run_start = 0;
  std::size_t run_length = 0;
  for (std::size_t i = 0; i <= raw.size(); ++i) {
    if (i < raw.size() && printable_ascii(raw[i])) {
      if (run_length == 0) run_start = i;
      ++run_length;
      continue;
    }
    if (run_length >= kMinStringRun) {
      std::string_view run(reinterpret_cast<const char*>(&raw[run_start]),
                           run_length);
      ++bins[fnv1a64(run) % kBlockSize];
    }
    run_length = 0;
  }
  return bins;
}

FeatureVector assemble_features(std::span<const std::uint8_t> raw,
                                const pe::PeSummary& summary) {
  const auto byte_entropy = byte_entropy_features(raw);
  const auto imports = import_features(summary.imports);
  const auto metadata = metadata_features(summary.numeric_fields);
  const auto strings = string_features(raw);

  FeatureVector out;
  for (std::size_t i = 0; i < kBlockSize; ++i) {
    out.values[i] = static_cast<double>(byte_entropy[i]);
    out.values[kBlockSize + i] = static_cast<double>(imports[i]);
    out.values[2 * kBlockSize + i] = metadata[i];
    out.values[3 * kBlockSize + i] = static_cast<double>(strings[i]);
  }
  for (double& v : out.values) v = std::log10(1.0 + v);
  return out;
}

}  // namespace bns::features
