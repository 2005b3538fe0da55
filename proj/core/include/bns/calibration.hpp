#pragma once

#include <span>
#include <vector>

namespace bns::calibration {

/// Score samples per class plus the KDE bandwidth. The base rate is the
/// assumed malware-to-everything ratio of the target network; it is not
/// persisted with the model and is supplied at scoring time.
struct CalibrationModel {
  std::vector<double> benign_scores;
  std::vector<double> malware_scores;
  double bandwidth = 0.01;
  double base_rate = 0.5;
};

/// Epanechnikov kernel density at x over samples in [0, 1]. Samples are
/// mirrored about 0 and 1 so no probability mass leaks outside the unit
/// interval. Throws std::invalid_argument on an empty sample set or a
/// non-positive bandwidth, std::domain_error for x outside [0, 1].
double kde_pdf(std::span<const double> samples, double x, double bandwidth);

/// Posterior malware probability from class densities and the base rate.
/// When both densities vanish the prior is the only information left, so
/// the base rate itself is returned.
double threat_from_densities(double malware_density, double benign_density,
                             double base_rate);

/// threat_from_densities applied to the model's KDE densities at `score`.
double threat_score(double score, const CalibrationModel& calib);

}  // namespace bns::calibration
