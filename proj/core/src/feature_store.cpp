#include "bns/feature_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian native");

namespace bns::feature_store {
namespace {

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data),
            static_cast<std::streamsize>(size));
}

void read_bytes(std::ifstream& in, void* data, std::size_t size,
                const std::string& path, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in.gcount() != static_cast<std::streamsize>(size)) {
    throw std::runtime_error(path + ": truncated feature matrix (" +
                             what + ")");
  }
}

}  // namespace

void write_matrix(const std::string& path, const FeatureMatrix& matrix) {
  if (matrix.data.size() != matrix.rows * matrix.cols) {
    throw std::invalid_argument("feature matrix shape/data mismatch");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_bytes(out, kMatrixMagic, sizeof(kMatrixMagic));
  std::uint32_t version = kMatrixVersion;
  write_bytes(out, &version, sizeof(version));
  std::uint64_t rows = matrix.rows;
  std::uint64_t cols = matrix.cols;
  write_bytes(out, &rows, sizeof(rows));
  write_bytes(out, &cols, sizeof(cols));
  write_bytes(out, matrix.data.data(), matrix.data.size() * sizeof(float));
  if (!out) throw std::runtime_error(path + ": write failed");
}

FeatureMatrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[4];
  read_bytes(in, magic, sizeof(magic), path, "magic");
  if (std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path + ": not a BNSF feature matrix");
  }
  std::uint32_t version = 0;
  read_bytes(in, &version, sizeof(version), path, "version");
  if (version != kMatrixVersion) {
    throw std::runtime_error(path + ": unsupported BNSF version " +
                             std::to_string(version));
  }
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  read_bytes(in, &rows, sizeof(rows), path, "rows");
  read_bytes(in, &cols, sizeof(cols), path, "cols");
  FeatureMatrix matrix;
  matrix.rows = static_cast<std::size_t>(rows);
  matrix.cols = static_cast<std::size_t>(cols);
  matrix.data.resize(matrix.rows * matrix.cols);
  read_bytes(in, matrix.data.data(), matrix.data.size() * sizeof(float),
             path, "data");
  return matrix;
}

void write_sidecar(const std::string& path,
                   const std::vector<SidecarRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const SidecarRow& row : rows) {
    out << row.path << '\t' << row.label << '\t' << row.timestamp << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<SidecarRow> read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<SidecarRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t first = line.find('\t');
    std::size_t second =
        first == std::string::npos ? std::string::npos
                                   : line.find('\t', first + 1);
    if (second == std::string::npos) {
      throw std::runtime_error(path + ": malformed sidecar line: " + line);
    }
    SidecarRow row;
    row.path = line.substr(0, first);
    row.label = line.substr(first + 1, second - first - 1);
    row.timestamp = std::stoll(line.substr(second + 1));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bns::feature_store
