#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bns/calibration.hpp"
#include "bns/evaluation.hpp"
#include "bns/features.hpp"
#include "bns/net.hpp"
#include "bns/rng.hpp"

namespace {

std::vector<std::uint8_t> random_blob(std::size_t size, std::uint64_t seed) {
  bns::Rng rng(seed);
  std::vector<std::uint8_t> blob(size);
  for (auto& b : blob) b = static_cast<std::uint8_t>(rng.next_u64());
  return blob;
}

void BM_WindowEntropy(benchmark::State& state) {
  const auto blob = random_blob(1024, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::features::window_entropy(blob));
  }
}
BENCHMARK(BM_WindowEntropy);

void BM_ByteEntropyFeatures(benchmark::State& state) {
  const auto blob = random_blob(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::features::byte_entropy_features(blob));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_ByteEntropyFeatures)->Arg(64 << 10)->Arg(1 << 20);

void BM_StringFeatures(benchmark::State& state) {
  const auto blob = random_blob(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::features::string_features(blob));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_StringFeatures)->Arg(1 << 20);

void BM_Forward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  bns::MlpModel model = bns::init_glorot({1024, 1024, 1024, 1}, 4);
  bns::Rng rng(5);
  Eigen::MatrixXd X(batch, 1024);
  for (int r = 0; r < batch; ++r) {
    for (int c = 0; c < 1024; ++c) X(r, c) = rng.next_gaussian();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::predict(model, X));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * batch);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  const int batch = 256;
  bns::MlpModel model = bns::init_glorot({1024, 1024, 1024, 1}, 6);
  bns::AdamState adam = bns::make_adam_state(model);
  bns::Rng rng(7);
  Eigen::MatrixXd X(batch, 1024);
  Eigen::VectorXd y(batch);
  for (int r = 0; r < batch; ++r) {
    for (int c = 0; c < 1024; ++c) X(r, c) = rng.next_gaussian();
    y(r) = rng.next_bernoulli(0.5) ? 1.0 : 0.0;
  }
  for (auto _ : state) {
    bns::ForwardCache cache;
    const Eigen::VectorXd y_hat = bns::forward(model, X, true, rng, &cache);
    const bns::Gradients grads = bns::backward(model, y, cache);
    bns::adam_step(model, adam, grads);
    benchmark::DoNotOptimize(model.weights.back()(0, 0));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * batch);
}
BENCHMARK(BM_TrainStep);

void BM_KdePdf(benchmark::State& state) {
  bns::Rng rng(8);
  std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) s = rng.next_double();
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::calibration::kde_pdf(samples, x, 0.01));
    x += 0.001;
    if (x > 1.0) x = 0.0;
  }
}
BENCHMARK(BM_KdePdf)->Arg(100)->Arg(10000);

void BM_RocCurve(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  bns::Rng rng(9);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.next_double();
    labels[i] = rng.next_bernoulli(0.5) ? 1 : 0;
  }
  labels[0] = 0;
  labels[1] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bns::evaluation::roc_curve(scores, labels));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RocCurve)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
