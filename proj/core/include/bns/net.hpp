#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "bns/rng.hpp"

namespace bns {

// Feedforward net: dense layers with per-unit PReLU on hidden layers, sigmoid
// output, dropout on the input of every dense layer (inverted scaling).
struct MlpModel {
  std::vector<int> layer_sizes;               // e.g. {1024, 1024, 1024, 1}
  std::vector<Eigen::MatrixXd> weights;       // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;        // biases[l]: layer_sizes[l+1]
  std::vector<Eigen::VectorXd> prelu_slopes;  // hidden layers only, per output unit
  double keep_prob = 0.8;

  int num_dense_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return layer_sizes.front(); }
  bool all_finite() const;
};

// Weights ~ Normal(0, 2/(n_in+n_out)), biases 0, PReLU slopes 0.25.
MlpModel init_glorot(const std::vector<int>& layer_sizes, std::uint64_t seed,
                     double keep_prob = 0.8);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;      // d(l): what each dense layer consumed
  std::vector<Eigen::MatrixXd> preacts;     // z(l)
  std::vector<Eigen::VectorXd> mask_scale;  // r(l)/h at train time, all ones otherwise
  Eigen::VectorXd output;                   // sigmoid scores, one per row of X
};

// training=true samples one Bernoulli(keep_prob) mask vector per dropout site
// per call and scales kept units by 1/keep_prob; training=false applies no
// mask and consumes no randomness.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& X,
                        bool training, Rng& rng, ForwardCache* cache = nullptr);

// Same as a training-mode forward but with caller-supplied 0/1 masks (one
// vector per dense layer, sized like its input). Used to pin masks in tests.
Eigen::VectorXd forward_with_masks(const MlpModel& model, const Eigen::MatrixXd& X,
                                   const std::vector<Eigen::VectorXd>& masks,
                                   ForwardCache* cache = nullptr);

// Summed cross-entropy, natural log, predictions clamped to [1e-7, 1-1e-7].
double loss(const Eigen::VectorXd& y_star, const Eigen::VectorXd& y_hat);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::VectorXd> prelu_slopes;
};

// Exact gradients of loss() through the cached forward pass, including the
// per-unit PReLU slope gradients. The clamp is part of the function being
// differentiated: saturated outputs contribute zero gradient.
Gradients backward(const MlpModel& model, const Eigen::VectorXd& y_hat,
                   const ForwardCache& cache);

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long t = 0;
  Gradients m;
  Gradients v;
};

AdamState make_adam_state(const MlpModel& model, const AdamConfig& config = {});

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads);

struct TrainOptions {
  int epochs = 200;
  double stop_train_error = 0.02;  // mean cross-entropy per sample
  int batch_size = 256;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

struct TrainResult {
  std::vector<double> epoch_mean_loss;
  int epochs_run = 0;
  bool stopped_early = false;
};

// Shuffles each epoch with a seeded RNG; stops at the epoch limit or once the
// epoch's mean training cross-entropy per sample drops below
// stop_train_error. Refuses single-class datasets.
TrainResult train(MlpModel& model, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& y, const TrainOptions& opts);

// forward() with training=false.
Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X);

}  // namespace bns
