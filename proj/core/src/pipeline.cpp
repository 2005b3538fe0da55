#include "bns/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "bns/calibration.hpp"
#include "bns/evaluation.hpp"
#include "bns/feature_store.hpp"
#include "bns/model_io.hpp"
#include "bns/net.hpp"
#include "bns/pe.hpp"
#include "bns/rng.hpp"

namespace bns::pipeline {

namespace fs = std::filesystem;

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string file_id_of(const std::string& path) {
  return fs::path(path).filename().string();
}

std::optional<std::vector<std::uint8_t>> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) return std::nullopt;
  return bytes;
}

// Explicit files keep their given order; each directory expands to its
// regular files sorted by path, so runs are reproducible.
std::vector<std::string> list_input_files(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& entry : inputs) {
    std::error_code ec;
    if (fs::is_directory(entry, ec)) {
      std::vector<std::string> batch;
      for (const auto& de : fs::directory_iterator(entry, ec)) {
        if (de.is_regular_file()) batch.push_back(de.path().string());
      }
      std::sort(batch.begin(), batch.end());
      files.insert(files.end(), batch.begin(), batch.end());
    } else if (fs::is_regular_file(entry, ec)) {
      files.push_back(entry);
    } else {
      std::cerr << "warning: input not found, skipping: " << entry << "\n";
    }
  }
  return files;
}

struct ExtractedRow {
  features::FeatureVector fv;
  std::int64_t timestamp = 0;
};

// Parallel across files; slot order preserves input order regardless of the
// thread count.
std::vector<std::optional<ExtractedRow>> extract_all(
    const std::vector<std::string>& files, int threads) {
  std::vector<std::optional<ExtractedRow>> rows(files.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      auto bytes = read_file_bytes(files[i]);
      if (!bytes) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "warning: cannot read, skipping: " << files[i] << "\n";
        continue;
      }
      pe::PeSummary summary = pe::parse_pe(*bytes);
      ExtractedRow row;
      row.fv = features::assemble_features(*bytes, summary);
      row.timestamp = summary.compile_timestamp;
      rows[i] = std::move(row);
    }
  };

  const int n_threads = std::max(1, threads);
  if (n_threads == 1 || files.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int spawn = std::min<std::size_t>(n_threads, files.size());
    pool.reserve(spawn);
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

// Mask-selected feature columns, block order preserved, floats widened to
// doubles for training.
Eigen::MatrixXd select_columns(const feature_store::FeatureMatrix& matrix,
                               const std::vector<features::Block>& mask,
                               const std::vector<std::size_t>& row_indices) {
  const std::size_t width = features::kBlockSize * mask.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(row_indices.size()),
                    static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < row_indices.size(); ++r) {
    std::size_t out_c = 0;
    for (features::Block b : mask) {
      const std::size_t base = static_cast<std::size_t>(b) * features::kBlockSize;
      for (std::size_t c = 0; c < features::kBlockSize; ++c) {
        X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(out_c++)) =
            matrix.at(row_indices[r], base + c);
      }
    }
  }
  return X;
}

struct LabeledDataset {
  Eigen::MatrixXd X;            // n x (256 * |mask|)
  Eigen::VectorXd y;            // 0 benign, 1 malware
  std::vector<std::string> ids;
  std::vector<std::int64_t> timestamps;  // from the votes CSV
  std::size_t discarded = 0;
  std::size_t unmatched = 0;
};

LabeledDataset load_labeled_dataset(const RunManifest& m) {
  const feature_store::FeatureMatrix matrix = feature_store::read_matrix(m.matrix_path);
  if (matrix.cols != features::kVectorSize) {
    throw std::runtime_error("matrix has " + std::to_string(matrix.cols) +
                             " columns, expected " +
                             std::to_string(features::kVectorSize));
  }
  const auto sidecar = feature_store::read_sidecar(feature_store::sidecar_path(m.matrix_path));
  if (sidecar.size() != matrix.rows) {
    throw std::runtime_error("sidecar row count does not match matrix");
  }
  const auto votes = evaluation::read_votes_csv(m.votes_csv);
  std::map<std::string, evaluation::VoteRecord> by_id;
  for (const auto& v : votes) {
    if (!by_id.emplace(v.file_id, v).second) {
      std::cerr << "warning: duplicate vote row for " << v.file_id
                << ", keeping the first\n";
    }
  }

  LabeledDataset ds;
  std::vector<std::size_t> keep_rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < sidecar.size(); ++i) {
    const std::string id = file_id_of(sidecar[i].path);
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      std::cerr << "warning: no vote row for " << id << ", skipping\n";
      ++ds.unmatched;
      continue;
    }
    const evaluation::Label label =
        evaluation::label_from_votes(it->second.alarms, it->second.engines);
    if (label == evaluation::Label::kDiscarded) {
      ++ds.discarded;
      continue;
    }
    keep_rows.push_back(i);
    labels.push_back(label == evaluation::Label::kMalware ? 1.0 : 0.0);
    ds.ids.push_back(id);
    ds.timestamps.push_back(it->second.compile_timestamp);
  }

  ds.X = select_columns(matrix, m.mask_blocks, keep_rows);
  ds.y = Eigen::Map<const Eigen::VectorXd>(labels.data(),
                                           static_cast<Eigen::Index>(labels.size()));
  return ds;
}

TrainOptions train_options(const RunManifest& m, std::string_view seed_tag) {
  TrainOptions opts;
  opts.epochs = m.epochs;
  opts.batch_size = m.batch_size;
  opts.seed = derive_seed(m.seed, seed_tag);
  return opts;
}

MlpModel fit_model(const RunManifest& m, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, std::string_view tag,
                   TrainResult* result_out) {
  const std::vector<int> sizes = {static_cast<int>(X.cols()), 1024, 1024, 1};
  MlpModel model = init_glorot(sizes, derive_seed(m.seed, std::string(tag) + "-init"),
                               m.keep_prob);
  TrainResult result = train(model, X, y, train_options(m, std::string(tag) + "-train"));
  if (result_out) *result_out = result;
  return model;
}

void write_roc_csv(const std::string& path, const evaluation::RocCurve& roc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc.points) {
    out << fmt_g(p.threshold) << ',' << fmt_g(p.fpr) << ',' << fmt_g(p.tpr) << '\n';
  }
}

void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "key,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

std::vector<int> to_int_labels(const Eigen::VectorXd& y,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    labels.push_back(y(static_cast<Eigen::Index>(i)) == 1.0 ? 1 : 0);
  }
  return labels;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X,
                          const std::vector<std::size_t>& indices) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), X.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(indices[r]));
  }
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y,
                          const std::vector<std::size_t>& indices) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(indices[r]));
  }
  return out;
}

int validate_common(const RunManifest& m) {
  if (m.mask_blocks.empty()) {
    std::cerr << "error: feature mask is empty\n";
    return kExitUsage;
  }
  if (m.epochs <= 0 || m.batch_size <= 0) {
    std::cerr << "error: epochs and batch size must be positive\n";
    return kExitUsage;
  }
  if (!(m.keep_prob > 0.0 && m.keep_prob <= 1.0)) {
    std::cerr << "error: keep-prob must be in (0, 1]\n";
    return kExitUsage;
  }
  if (!(m.bandwidth > 0.0)) {
    std::cerr << "error: bandwidth must be positive\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace

std::vector<features::Block> parse_mask(const std::string& text) {
  std::set<features::Block> seen;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string name = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (name == "all") {
      for (std::size_t i = 0; i < features::kNumBlocks; ++i) {
        seen.insert(static_cast<features::Block>(i));
      }
    } else if (!name.empty()) {
      const auto block = features::block_from_name(name);
      if (!block) {
        throw std::invalid_argument("unknown feature block '" + name + "'");
      }
      seen.insert(*block);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seen.empty()) {
    throw std::invalid_argument("feature mask is empty");
  }
  return {seen.begin(), seen.end()};  // std::set orders by enum value
}

int cmd_extract(const RunManifest& m) {
  try {
    const std::vector<std::string> files = list_input_files(m.inputs);
    if (files.empty()) {
      std::cerr << "error: no input files\n";
      return kExitData;
    }
    const auto rows = extract_all(files, m.threads);

    feature_store::FeatureMatrix matrix;
    matrix.cols = features::kVectorSize;
    std::vector<feature_store::SidecarRow> sidecar;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (!rows[i]) {
        ++skipped;
        continue;
      }
      ++matrix.rows;
      for (double v : rows[i]->fv.values) {
        matrix.data.push_back(static_cast<float>(v));
      }
      sidecar.push_back({files[i], "unlabeled", rows[i]->timestamp});
    }
    if (matrix.rows == 0) {
      std::cerr << "error: no readable input files\n";
      return kExitData;
    }

    fs::create_directories(m.out_dir);
    const std::string matrix_path = (fs::path(m.out_dir) / "features.bnsf").string();
    feature_store::write_matrix(matrix_path, matrix);
    feature_store::write_sidecar(feature_store::sidecar_path(matrix_path), sidecar);
    std::cout << "extracted " << matrix.rows << " rows (" << skipped
              << " skipped) -> " << matrix_path << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int cmd_train(const RunManifest& m) {
  if (const int rc = validate_common(m); rc != kExitOk) return rc;
  try {
    LabeledDataset ds;
    try {
      ds = load_labeled_dataset(m);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitData;
    }
    if (ds.X.rows() == 0) {
      std::cerr << "error: no labeled rows after vote filtering\n";
      return kExitData;
    }

    TrainResult result;
    MlpModel model;
    try {
      model = fit_model(m, ds.X, ds.y, "model", &result);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitData;
    }

    const Eigen::VectorXd scores = predict(model, ds.X);
    ModelBundle bundle;
    bundle.model = std::move(model);
    bundle.calibration.bandwidth = m.bandwidth;
    bundle.calibration.base_rate = m.base_rate.value_or(0.5);
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      if (ds.y(i) == 1.0) {
        bundle.calibration.malware_scores.push_back(scores(i));
      } else {
        bundle.calibration.benign_scores.push_back(scores(i));
      }
    }
    bundle.mask_blocks = m.mask_blocks;
    bundle.seed = m.seed;
    bundle.epochs_run = result.epochs_run;
    bundle.final_loss = result.epoch_mean_loss.back();

    fs::create_directories(m.out_dir);
    const std::string model_path = (fs::path(m.out_dir) / "model.bnsm").string();
    write_model(model_path, bundle);

    std::ofstream log((fs::path(m.out_dir) / "train_log.csv").string(), std::ios::trunc);
    log << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
      log << (e + 1) << ',' << fmt_g(result.epoch_mean_loss[e]) << '\n';
    }

    std::cout << "trained on " << ds.X.rows() << " rows (" << ds.discarded
              << " discarded, " << ds.unmatched << " unmatched), "
              << result.epochs_run << " epochs, final loss "
              << fmt_g(result.epoch_mean_loss.back()) << " -> " << model_path
              << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int cmd_evaluate(const RunManifest& m) {
  if (const int rc = validate_common(m); rc != kExitOk) return rc;
  if (m.mode != "kfold" && m.mode != "timesplit") {
    std::cerr << "error: mode must be kfold or timesplit\n";
    return kExitUsage;
  }
  if (m.mode == "kfold" && m.folds < 2) {
    std::cerr << "error: need at least 2 folds\n";
    return kExitUsage;
  }
  std::int64_t boundary = 0;
  std::int64_t min_ts = 0;
  std::int64_t max_ts = 0;
  if (m.mode == "timesplit") {
    try {
      boundary = evaluation::parse_date_utc(m.split_date);
      min_ts = evaluation::parse_date_utc(m.min_date);
      max_ts = m.max_date
                   ? evaluation::parse_date_utc(*m.max_date)
                   : std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  try {
    LabeledDataset ds;
    try {
      ds = load_labeled_dataset(m);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitData;
    }
    const std::size_t n = static_cast<std::size_t>(ds.X.rows());
    if (n == 0) {
      std::cerr << "error: no labeled rows after vote filtering\n";
      return kExitData;
    }

    fs::create_directories(m.out_dir);
    std::vector<std::pair<std::string, std::string>> summary;
    summary.emplace_back("mode", m.mode);
    summary.emplace_back("rows_used", std::to_string(n));
    summary.emplace_back("rows_discarded", std::to_string(ds.discarded));
    summary.emplace_back("rows_unmatched", std::to_string(ds.unmatched));

    if (m.mode == "kfold") {
      const auto folds = evaluation::kfold_split(n, m.folds, derive_seed(m.seed, "folds"));

      struct FoldOutcome {
        std::vector<double> scores;
        std::vector<int> labels;
        std::string error;
      };
      std::vector<FoldOutcome> outcomes(folds.size());

      std::atomic<std::size_t> next{0};
      auto fold_worker = [&] {
        for (;;) {
          const std::size_t f = next.fetch_add(1);
          if (f >= folds.size()) return;
          std::vector<std::size_t> train_idx;
          for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
          }
          try {
            TrainResult fold_result;
            const std::string tag = "fold" + std::to_string(f);
            MlpModel fold_model =
                fit_model(m, take_rows(ds.X, train_idx), take_rows(ds.y, train_idx),
                          tag, &fold_result);
            const Eigen::VectorXd held = predict(fold_model, take_rows(ds.X, folds[f]));
            outcomes[f].scores.assign(held.data(), held.data() + held.size());
            outcomes[f].labels = to_int_labels(ds.y, folds[f]);
          } catch (const std::exception& e) {
            outcomes[f].error = e.what();
          }
        }
      };
      const int n_threads = std::max(1, std::min<int>(m.threads, static_cast<int>(folds.size())));
      if (n_threads == 1) {
        fold_worker();
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(fold_worker);
        for (auto& th : pool) th.join();
      }

      for (std::size_t f = 0; f < outcomes.size(); ++f) {
        if (!outcomes[f].error.empty()) {
          std::cerr << "error: fold " << f << ": " << outcomes[f].error << "\n";
          return kExitData;
        }
      }

      std::vector<double> pooled_scores;
      std::vector<int> pooled_labels;
      std::vector<double> fold_aucs;
      std::vector<double> fold_tprs;
      std::vector<evaluation::RocCurve> fold_curves;
      for (std::size_t f = 0; f < outcomes.size(); ++f) {
        evaluation::RocCurve roc;
        try {
          roc = evaluation::roc_curve(outcomes[f].scores, outcomes[f].labels);
        } catch (const std::exception& e) {
          // A fold whose held-out slice is single-class is a data problem.
          std::cerr << "error: fold " << f << ": " << e.what() << "\n";
          return kExitData;
        }
        write_roc_csv((fs::path(m.out_dir) / ("roc_fold_" + std::to_string(f) + ".csv")).string(),
                      roc);
        fold_aucs.push_back(roc.auc);
        fold_tprs.push_back(evaluation::tpr_at_fpr(roc, 0.001));
        pooled_scores.insert(pooled_scores.end(), outcomes[f].scores.begin(),
                             outcomes[f].scores.end());
        pooled_labels.insert(pooled_labels.end(), outcomes[f].labels.begin(),
                             outcomes[f].labels.end());
        fold_curves.push_back(std::move(roc));
      }

      // Vertical average on a fixed FPR grid (the paper's averaged ROC).
      {
        std::ofstream out((fs::path(m.out_dir) / "roc_mean.csv").string(), std::ios::trunc);
        out << "fpr,tpr\n";
        for (int i = 0; i <= 1000; ++i) {
          const double grid_fpr = static_cast<double>(i) / 1000.0;
          double mean_tpr = 0.0;
          for (const auto& c : fold_curves) {
            mean_tpr += evaluation::tpr_at_fpr(c, grid_fpr);
          }
          mean_tpr /= static_cast<double>(fold_curves.size());
          out << fmt_g(grid_fpr) << ',' << fmt_g(mean_tpr) << '\n';
        }
      }

      const evaluation::RocCurve pooled = evaluation::roc_curve(pooled_scores, pooled_labels);
      summary.emplace_back("folds", std::to_string(folds.size()));
      for (std::size_t f = 0; f < fold_aucs.size(); ++f) {
        summary.emplace_back("auc_fold_" + std::to_string(f), fmt_g(fold_aucs[f]));
        summary.emplace_back("tpr_at_0.001_fold_" + std::to_string(f), fmt_g(fold_tprs[f]));
      }
      double auc_mean = 0.0;
      double tpr_mean = 0.0;
      for (std::size_t f = 0; f < fold_aucs.size(); ++f) {
        auc_mean += fold_aucs[f];
        tpr_mean += fold_tprs[f];
      }
      auc_mean /= static_cast<double>(fold_aucs.size());
      tpr_mean /= static_cast<double>(fold_tprs.size());
      summary.emplace_back("auc_mean", fmt_g(auc_mean));
      summary.emplace_back("tpr_at_0.001_mean", fmt_g(tpr_mean));
      summary.emplace_back("auc", fmt_g(pooled.auc));
      summary.emplace_back("tpr_at_0.001", fmt_g(evaluation::tpr_at_fpr(pooled, 0.001)));
    } else {
      const auto split = evaluation::time_split(ds.timestamps, boundary, min_ts, max_ts);
      summary.emplace_back("train_rows", std::to_string(split.train_indices.size()));
      summary.emplace_back("test_rows", std::to_string(split.test_indices.size()));
      summary.emplace_back("dropped_rows", std::to_string(split.dropped_indices.size()));
      if (split.train_indices.empty() || split.test_indices.empty()) {
        std::cerr << "error: time split left an empty side (train="
                  << split.train_indices.size() << ", test="
                  << split.test_indices.size() << ")\n";
        return kExitData;
      }
      TrainResult ts_result;
      MlpModel ts_model;
      try {
        ts_model = fit_model(m, take_rows(ds.X, split.train_indices),
                             take_rows(ds.y, split.train_indices), "timesplit",
                             &ts_result);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
      }
      const Eigen::VectorXd held = predict(ts_model, take_rows(ds.X, split.test_indices));
      std::vector<double> scores(held.data(), held.data() + held.size());
      const std::vector<int> labels = to_int_labels(ds.y, split.test_indices);
      evaluation::RocCurve roc;
      try {
        roc = evaluation::roc_curve(scores, labels);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: test side is single-class: " << e.what() << "\n";
        return kExitData;
      }
      write_roc_csv((fs::path(m.out_dir) / "roc_timesplit.csv").string(), roc);
      summary.emplace_back("auc", fmt_g(roc.auc));
      summary.emplace_back("tpr_at_0.001", fmt_g(evaluation::tpr_at_fpr(roc, 0.001)));
    }

    write_summary_csv((fs::path(m.out_dir) / "summary.csv").string(), summary);
    std::cout << "evaluation summary -> "
              << (fs::path(m.out_dir) / "summary.csv").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int cmd_score(const RunManifest& m) {
  try {
    ModelBundle bundle;
    try {
      bundle = read_model(m.model_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitData;
    }

    double base_rate = 0.5;
    if (m.base_rate) {
      base_rate = *m.base_rate;
    } else {
      std::cerr << "warning: no --base-rate given, using default 0.5\n";
    }
    calibration::CalibrationModel calib = bundle.calibration;
    calib.base_rate = base_rate;

    const std::vector<std::string> files = list_input_files(m.inputs);
    if (files.empty()) {
      std::cerr << "error: no input files\n";
      return kExitData;
    }
    const auto rows = extract_all(files, m.threads);

    std::vector<std::string> ids;
    std::vector<std::size_t> kept;
    feature_store::FeatureMatrix matrix;
    matrix.cols = features::kVectorSize;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (!rows[i]) continue;
      ++matrix.rows;
      for (double v : rows[i]->fv.values) {
        matrix.data.push_back(static_cast<float>(v));
      }
      ids.push_back(file_id_of(files[i]));
      kept.push_back(matrix.rows - 1);
    }
    if (matrix.rows == 0) {
      std::cerr << "error: no readable input files\n";
      return kExitData;
    }

    const Eigen::MatrixXd X = select_columns(matrix, bundle.mask_blocks, kept);
    const Eigen::VectorXd raw = predict(bundle.model, X);

    fs::create_directories(m.out_dir);
    const std::string scores_path = (fs::path(m.out_dir) / "scores.csv").string();
    std::ofstream out(scores_path, std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot open " << scores_path << "\n";
      return kExitData;
    }
    out << "file_id,raw_score,threat_score\n";
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      const double threat = calibration::threat_score(raw(i), calib);
      out << ids[static_cast<std::size_t>(i)] << ',' << fmt_g(raw(i)) << ','
          << fmt_g(threat) << '\n';
    }
    std::cout << "scored " << raw.size() << " files -> " << scores_path << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace bns::pipeline
