#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bns/calibration.hpp"
#include "bns/rng.hpp"

using bns::calibration::CalibrationModel;
using bns::calibration::kde_pdf;
using bns::calibration::threat_from_densities;
using bns::calibration::threat_score;

namespace {

// Simpson's rule over [0, 1]; n must be even.
double integrate_pdf(const std::vector<double>& samples, double bw, int n) {
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * kde_pdf(samples, x, bw);
  }
  return sum / (3.0 * n);
}

}  // namespace

TEST_CASE("kde_pdf: closed-form single-sample values") {
  // Kernel peak: 0.75/bw at the sample itself, mirrors out of reach.
  CHECK(kde_pdf(std::vector<double>{0.5}, 0.5, 0.01) ==
        doctest::Approx(75.0).epsilon(1e-12));

  // Outside the kernel support the density is exactly zero.
  CHECK(kde_pdf(std::vector<double>{0.5}, 0.52, 0.01) == 0.0);
  CHECK(kde_pdf(std::vector<double>{0.5}, 0.0, 0.01) == 0.0);
  CHECK(kde_pdf(std::vector<double>{0.5}, 1.0, 0.01) == 0.0);

  // A sample at the boundary doubles via its own mirror image.
  CHECK(kde_pdf(std::vector<double>{0.0}, 0.0, 0.01) ==
        doctest::Approx(150.0).epsilon(1e-12));
  CHECK(kde_pdf(std::vector<double>{1.0}, 1.0, 0.01) ==
        doctest::Approx(150.0).epsilon(1e-12));

  // Halfway down the kernel: 0.75 * (1 - 0.5^2) / bw.
  CHECK(kde_pdf(std::vector<double>{0.5}, 0.505, 0.01) ==
        doctest::Approx(0.75 * 0.75 / 0.01).epsilon(1e-12));

  // Two samples average.
  CHECK(kde_pdf(std::vector<double>{0.5, 0.9}, 0.5, 0.01) ==
        doctest::Approx(37.5).epsilon(1e-12));
}

TEST_CASE("kde_pdf: integrates to one, including boundary-heavy samples") {
  bns::Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> samples;
    const int n = 1 + static_cast<int>(rng.next_u64() % 40);
    for (int i = 0; i < n; ++i) samples.push_back(rng.next_double());
    const double integral = integrate_pdf(samples, 0.01, 10000);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
  }

  // Mass at the edges would be cut in half without mirroring.
  CHECK(integrate_pdf({0.0}, 0.01, 10000) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(integrate_pdf({1.0}, 0.01, 10000) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(integrate_pdf({0.0, 1.0, 0.5}, 0.05, 10000) ==
        doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("kde_pdf: argument validation") {
  CHECK_THROWS_AS(kde_pdf(std::vector<double>{}, 0.5, 0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(kde_pdf(std::vector<double>{0.5}, 0.5, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(kde_pdf(std::vector<double>{0.5}, 0.5, -0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(kde_pdf(std::vector<double>{0.5}, -0.1, 0.01),
                  std::domain_error);
  CHECK_THROWS_AS(kde_pdf(std::vector<double>{0.5}, 1.1, 0.01),
                  std::domain_error);
}

TEST_CASE("threat_from_densities: posterior algebra") {
  // Equal densities leave only the prior.
  CHECK(threat_from_densities(3.0, 3.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(threat_from_densities(3.0, 3.0, 0.2) == doctest::Approx(0.2).epsilon(1e-12));

  // Zero benign density: certainty regardless of the prior.
  CHECK(threat_from_densities(2.0, 0.0, 0.1) == doctest::Approx(1.0).epsilon(1e-12));
  // Zero malware density: the other certainty.
  CHECK(threat_from_densities(0.0, 2.0, 0.9) == doctest::Approx(0.0).epsilon(1e-12));

  // Hand-computed: (2 * 0.1) / (2 * 0.1 + 1 * 0.9) = 0.2 / 1.1.
  CHECK(threat_from_densities(2.0, 1.0, 0.1) ==
        doctest::Approx(0.2 / 1.1).epsilon(1e-12));

  // No evidence at all collapses to the prior.
  CHECK(threat_from_densities(0.0, 0.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));

  // Degenerate priors behave as limits.
  CHECK(threat_from_densities(2.0, 1.0, 0.0) == 0.0);
  CHECK(threat_from_densities(2.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("threat_from_densities: bounded and monotone in the base rate") {
  bns::Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    const double pm = rng.next_double() * 100.0;
    const double pb = rng.next_double() * 100.0;
    const double r = rng.next_double();
    const double t = threat_from_densities(pm, pb, r);
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
  }

  double previous = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    const double t = threat_from_densities(1.5, 2.5, r);
    CHECK(t >= previous);
    previous = t;
  }
}

TEST_CASE("threat_score: ties kde and posterior together") {
  CalibrationModel calib;
  calib.benign_scores = {0.1, 0.15, 0.2};
  calib.malware_scores = {0.8, 0.85, 0.9};
  calib.bandwidth = 0.05;
  calib.base_rate = 0.5;

  // Deep in malware territory.
  CHECK(threat_score(0.85, calib) == doctest::Approx(1.0).epsilon(1e-9));
  // Deep in benign territory.
  CHECK(threat_score(0.15, calib) == doctest::Approx(0.0).epsilon(1e-9));
  // Nowhere near either class: falls back to the base rate.
  CHECK(threat_score(0.5, calib) == doctest::Approx(0.5).epsilon(1e-12));
  calib.base_rate = 0.07;
  CHECK(threat_score(0.5, calib) == doctest::Approx(0.07).epsilon(1e-12));

  // Agrees with composing the pieces by hand.
  calib.base_rate = 0.3;
  const double pm = kde_pdf(calib.malware_scores, 0.82, calib.bandwidth);
  const double pb = kde_pdf(calib.benign_scores, 0.82, calib.bandwidth);
  CHECK(threat_score(0.82, calib) ==
        doctest::Approx(threat_from_densities(pm, pb, 0.3)).epsilon(1e-12));
}

TEST_CASE("threat_score: monotone in the score when classes are separated") {
  CalibrationModel calib;
  bns::Rng rng(88);
  for (int i = 0; i < 50; ++i) {
    calib.benign_scores.push_back(0.25 * rng.next_double());
    calib.malware_scores.push_back(0.75 + 0.25 * rng.next_double());
  }
  calib.bandwidth = 0.4;  // wide kernels so both densities cover [0, 1]
  calib.base_rate = 0.5;

  double previous = -1.0;
  for (int i = 0; i <= 50; ++i) {
    const double s = static_cast<double>(i) / 50.0;
    const double t = threat_score(s, calib);
    CHECK(t >= previous - 1e-12);
    previous = t;
  }
}
