#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bns::evaluation {

enum class Label { kMalware, kBenign, kDiscarded };

std::string_view label_name(Label label);

/// Detector-vote labeling: alarm ratio >= 0.3 is malware, exactly zero
/// alarms is benign, anything in between is discarded from both training
/// and evaluation. Throws std::invalid_argument unless
/// 0 <= alarms <= engines with engines > 0.
Label label_from_votes(int alarms, int engines);

/// One dataset row joining a feature-matrix row with its vote metadata.
struct SampleRecord {
  std::string file_id;
  std::size_t feature_row = 0;
  int alarms = 0;
  int engines = 0;
  Label label = Label::kDiscarded;
  std::int64_t compile_timestamp = 0;
};

struct RocPoint {
  double threshold = 0.0;  // predicted positive iff score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Exact threshold sweep over the unique scores (ties grouped), anchored at
/// (0,0) and (1,1); auc by the trapezoid rule.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// labels are 0 (benign) / 1 (malware); both classes must be present.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// TPR at the largest achieved FPR <= target. Step convention: no
/// interpolation between operating points.
double tpr_at_fpr(const RocCurve& roc, double target_fpr = 0.001);

/// k disjoint, exhaustive index folds with sizes differing by at most one;
/// deterministic for a fixed seed.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k,
                                                  std::uint64_t seed);

struct TimeSplitResult {
  std::vector<std::size_t> train_indices;    // timestamp <  boundary
  std::vector<std::size_t> test_indices;     // timestamp >= boundary
  std::vector<std::size_t> dropped_indices;  // outside [min, max]
};

/// Chronological split. Records outside [min_timestamp, max_timestamp] are
/// dropped (forged or out-of-range compile timestamps); the boundary itself
/// lands on the test side.
TimeSplitResult time_split(std::span<const std::int64_t> timestamps,
                           std::int64_t boundary_timestamp,
                           std::int64_t min_timestamp,
                           std::int64_t max_timestamp);

/// fpr * endpoints * new_binaries_per_endpoint_per_day.
double expected_daily_false_positives(
    double fpr, double endpoints,
    double new_binaries_per_endpoint_per_day = 5.0);

/// Vote file row; see read_votes_csv for the schema.
struct VoteRecord {
  std::string file_id;
  int alarms = 0;
  int engines = 0;
  std::int64_t compile_timestamp = 0;
};

/// CSV with exact header "file_id,alarms,engines,compile_timestamp".
std::vector<VoteRecord> read_votes_csv(const std::string& path);

/// "YYYY-MM-DD" -> seconds since epoch at UTC midnight.
std::int64_t parse_date_utc(std::string_view date);

}  // namespace bns::evaluation
