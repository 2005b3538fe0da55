#include "bns/calibration.hpp"

#include <stdexcept>

namespace bns::calibration {
namespace {

double epanechnikov(double u) {
  return (u <= 1.0 && u >= -1.0) ? 0.75 * (1.0 - u * u) : 0.0;
}

}  // namespace

double kde_pdf(std::span<const double> samples, double x, double bandwidth) {
  if (samples.empty()) {
    throw std::invalid_argument("kde_pdf: empty sample set");
  }
  if (bandwidth <= 0.0) {
    throw std::invalid_argument("kde_pdf: bandwidth must be positive");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::domain_error("kde_pdf: x outside [0, 1]");
  }
  double sum = 0.0;
  for (double s : samples) {
    sum += epanechnikov((x - s) / bandwidth);        // the sample itself
    sum += epanechnikov((x + s) / bandwidth);        // mirrored about 0
    sum += epanechnikov((x - (2.0 - s)) / bandwidth);  // mirrored about 1
  }
  return sum / (static_cast<double>(samples.size()) * bandwidth);
}

double threat_from_densities(double malware_density, double benign_density,
                             double base_rate) {
  const double malware_mass = malware_density * base_rate;
  const double benign_mass = benign_density * (1.0 - base_rate);
  if (malware_mass == 0.0 && benign_mass == 0.0) return base_rate;
  return malware_mass / (malware_mass + benign_mass);
}

double threat_score(double score, const CalibrationModel& calib) {
  return threat_from_densities(
      kde_pdf(calib.malware_scores, score, calib.bandwidth),
      kde_pdf(calib.benign_scores, score, calib.bandwidth), calib.base_rate);
}

}  // namespace bns::calibration
