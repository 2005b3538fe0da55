#include "bns/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bns/rng.hpp"

namespace bns::evaluation {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kMalware: return "malware";
    case Label::kBenign: return "benign";
    case Label::kDiscarded: return "discarded";
  }
  return "?";
}

Label label_from_votes(int alarms, int engines) {
  if (engines <= 0) {
    throw std::invalid_argument("label_from_votes: engines must be positive");
  }
  if (alarms < 0 || alarms > engines) {
    throw std::invalid_argument("label_from_votes: alarms outside [0, engines]");
  }
  if (alarms == 0) return Label::kBenign;
  double ratio = static_cast<double>(alarms) / static_cast<double>(engines);
  return ratio >= 0.3 ? Label::kMalware : Label::kDiscarded;
}

RocCurve roc_curve(std::span<const double> scores,
                   std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc_curve: scores/labels size mismatch");
  }
  std::size_t positives = 0;
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw std::invalid_argument("roc_curve: labels must be 0 or 1");
    }
    positives += static_cast<std::size_t>(label);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc_curve: both classes must be present");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve roc;
  roc.points.push_back(
      {std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    // Consume the whole tie group before emitting a point.
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    roc.points.push_back({threshold,
                          static_cast<double>(fp) / static_cast<double>(negatives),
                          static_cast<double>(tp) / static_cast<double>(positives)});
  }

  double auc = 0.0;
  for (std::size_t p = 1; p < roc.points.size(); ++p) {
    const RocPoint& a = roc.points[p - 1];
    const RocPoint& b = roc.points[p];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  roc.auc = auc;
  return roc;
}

double tpr_at_fpr(const RocCurve& roc, double target_fpr) {
  double best = 0.0;
  for (const RocPoint& point : roc.points) {
    if (point.fpr <= target_fpr) best = std::max(best, point.tpr);
  }
  return best;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k,
                                                  std::uint64_t seed) {
  if (k < 1 || n < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("kfold_split: need n >= k >= 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }

  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t remainder = n % static_cast<std::size_t>(k);
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::size_t size = base + (f < remainder ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                    order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return folds;
}

TimeSplitResult time_split(std::span<const std::int64_t> timestamps,
                           std::int64_t boundary_timestamp,
                           std::int64_t min_timestamp,
                           std::int64_t max_timestamp) {
  TimeSplitResult result;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const std::int64_t t = timestamps[i];
    if (t < min_timestamp || t > max_timestamp) {
      result.dropped_indices.push_back(i);
    } else if (t < boundary_timestamp) {
      result.train_indices.push_back(i);
    } else {
      result.test_indices.push_back(i);
    }
  }
  return result;
}

double expected_daily_false_positives(
    double fpr, double endpoints, double new_binaries_per_endpoint_per_day) {
  if (fpr < 0.0 || endpoints < 0.0 || new_binaries_per_endpoint_per_day < 0.0) {
    throw std::invalid_argument(
        "expected_daily_false_positives: inputs must be non-negative");
  }
  return fpr * endpoints * new_binaries_per_endpoint_per_day;
}

std::vector<VoteRecord> read_votes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty votes file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "file_id,alarms,engines,compile_timestamp") {
    throw std::runtime_error(path + ": unexpected votes header: " + line);
  }

  std::vector<VoteRecord> records;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const char* what) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": " + what);
    };
    auto parse_int = [&](const std::string& cell, auto& out) {
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), out);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        fail("expected an integer");
      }
    };
    VoteRecord record;
    std::size_t start = 0;
    for (int column = 0; column < 4; ++column) {
      std::size_t comma = line.find(',', start);
      const bool last = column == 3;
      if (last != (comma == std::string::npos)) {
        fail("expected 4 columns");
      }
      std::string cell = line.substr(
          start, comma == std::string::npos ? std::string::npos
                                            : comma - start);
      switch (column) {
        case 0: record.file_id = cell; break;
        case 1: parse_int(cell, record.alarms); break;
        case 2: parse_int(cell, record.engines); break;
        case 3: parse_int(cell, record.compile_timestamp); break;
      }
      start = comma + 1;
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::int64_t parse_date_utc(std::string_view date) {
  int year = 0;
  unsigned month = 0;
  unsigned day = 0;
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') {
    throw std::invalid_argument("expected YYYY-MM-DD date: " +
                                std::string(date));
  }
  auto parse = [&](std::size_t begin, std::size_t len, auto& out) {
    auto [ptr, ec] = std::from_chars(date.data() + begin,
                                     date.data() + begin + len, out);
    if (ec != std::errc() || ptr != date.data() + begin + len) {
      throw std::invalid_argument("expected YYYY-MM-DD date: " +
                                  std::string(date));
    }
  };
  parse(0, 4, year);
  parse(5, 2, month);
  parse(8, 2, day);
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date: " + std::string(date));
  }
  const std::chrono::sys_days days{ymd};
  return std::chrono::duration_cast<std::chrono::seconds>(
             days.time_since_epoch())
      .count();
}

}  // namespace bns::evaluation
