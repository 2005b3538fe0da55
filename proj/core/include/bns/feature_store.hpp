#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bns::feature_store {

inline constexpr char kMatrixMagic[4] = {'B', 'N', 'S', 'F'};
inline constexpr std::uint32_t kMatrixVersion = 1;

/// Row-major feature matrix, 32-bit floats on disk.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // rows * cols

  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// One sidecar line per matrix row: source path, label, compile timestamp.
struct SidecarRow {
  std::string path;
  std::string label;  // "malware" | "benign" | "discarded" | "unlabeled"
  std::int64_t timestamp = 0;
};

/// Layout: magic "BNSF", version u32, rows u64, cols u64, then row-major
/// little-endian f32 data.
void write_matrix(const std::string& path, const FeatureMatrix& matrix);
FeatureMatrix read_matrix(const std::string& path);

void write_sidecar(const std::string& path,
                   const std::vector<SidecarRow>& rows);
std::vector<SidecarRow> read_sidecar(const std::string& path);

inline std::string sidecar_path(const std::string& matrix_path) {
  return matrix_path + ".sidecar";
}

}  // namespace bns::feature_store
