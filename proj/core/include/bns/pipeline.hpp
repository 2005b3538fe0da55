#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bns/features.hpp"

namespace bns::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

// Everything a run needs. The CLI fills this from flags and the optional
// config file; tests construct it directly.
struct RunManifest {
  std::vector<std::string> inputs;  // files, or directories expanded sorted
  std::string votes_csv;
  std::string out_dir = ".";
  std::string matrix_path;  // input for train/evaluate
  std::string model_path;   // input for score
  std::uint64_t seed = 1;
  std::vector<features::Block> mask_blocks = {
      features::Block::kByteEntropy, features::Block::kImports,
      features::Block::kMetadata, features::Block::kStrings};
  int epochs = 200;
  int batch_size = 256;
  double keep_prob = 0.8;
  double bandwidth = 0.01;
  std::optional<double> base_rate;  // score warns and uses 0.5 when unset
  int folds = 4;
  std::string mode = "kfold";  // kfold | timesplit
  std::string split_date = "2014-07-31";
  std::string min_date = "2000-01-01";
  std::optional<std::string> max_date;  // unset: the run date
  int threads = 1;
};

// Comma-separated block names (or "all"); result deduplicated and in
// canonical block order. Throws std::invalid_argument on unknown names.
std::vector<features::Block> parse_mask(const std::string& text);

// Reads every input file, extracts the full 1024-wide feature vector, and
// writes features.bnsf plus its sidecar under out_dir. Unreadable files are
// skipped with a warning.
int cmd_extract(const RunManifest& m);

// Joins the matrix with the votes CSV by file id (basename), drops discarded
// rows, trains on the mask-selected columns, and writes model.bnsm plus
// train_log.csv under out_dir.
int cmd_train(const RunManifest& m);

// kfold mode: per-fold ROC CSVs, a vertically averaged ROC, and summary.csv.
// timesplit mode: one ROC for the date-split evaluation plus summary.csv.
int cmd_evaluate(const RunManifest& m);

// Scores input files with a persisted model: scores.csv with
// file_id,raw_score,threat_score rows under out_dir.
int cmd_score(const RunManifest& m);

}  // namespace bns::pipeline
