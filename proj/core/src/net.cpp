#include "bns/net.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bns {

namespace {

constexpr double kProbClampLo = 1e-7;
constexpr double kProbClampHi = 1.0 - 1e-7;

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_input(const MlpModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_size()) {
    throw std::invalid_argument("forward: expected " +
                                std::to_string(model.input_size()) +
                                " feature columns, got " +
                                std::to_string(X.cols()));
  }
}

// Shared core: mask_scale[l] is r(l)/h (or all ones when dropout is off).
Eigen::VectorXd run_forward(const MlpModel& model, const Eigen::MatrixXd& X,
                            std::vector<Eigen::VectorXd> mask_scale,
                            ForwardCache* cache) {
  const int layers = model.num_dense_layers();
  const Eigen::Index n = X.rows();

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.inputs.assign(layers, {});
  c.preacts.assign(layers, {});
  c.mask_scale = std::move(mask_scale);

  Eigen::MatrixXd y = X;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd d = y;
    d.array().rowwise() *= c.mask_scale[l].transpose().array();
    c.inputs[l] = d;

    Eigen::MatrixXd z = d * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    c.preacts[l] = z;

    if (l + 1 < layers) {
      Eigen::ArrayXXd pos = (z.array() >= 0.0).cast<double>();
      Eigen::ArrayXXd coef =
          pos + ((1.0 - pos).rowwise() * model.prelu_slopes[l].transpose().array());
      y = (z.array() * coef).matrix();
    } else {
      Eigen::VectorXd out(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = sigmoid(z(i, 0));
      }
      c.output = out;
    }
  }
  return c.output;
}

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClampLo), kProbClampHi);
}

void adam_update(Eigen::MatrixXd& param, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                 const Eigen::MatrixXd& g, const AdamConfig& cfg, double bc1,
                 double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
  param.array() -=
      cfg.alpha * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

void adam_update(Eigen::VectorXd& param, Eigen::VectorXd& m, Eigen::VectorXd& v,
                 const Eigen::VectorXd& g, const AdamConfig& cfg, double bc1,
                 double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
  param.array() -=
      cfg.alpha * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace

bool MlpModel::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  for (const auto& a : prelu_slopes) {
    if (!a.allFinite()) return false;
  }
  return true;
}

MlpModel init_glorot(const std::vector<int>& layer_sizes, std::uint64_t seed,
                     double keep_prob) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_glorot: need at least input and output sizes");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("init_glorot: layer sizes must be positive");
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("init_glorot: keep_prob must be in (0, 1]");
  }

  MlpModel model;
  model.layer_sizes = layer_sizes;
  model.keep_prob = keep_prob;

  Rng rng(seed);
  const int layers = static_cast<int>(layer_sizes.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const int n_in = layer_sizes[l];
    const int n_out = layer_sizes[l + 1];
    const double stddev = std::sqrt(2.0 / (n_in + n_out));
    Eigen::MatrixXd w(n_out, n_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index cidx = 0; cidx < w.cols(); ++cidx) {
        w(r, cidx) = stddev * rng.next_gaussian();
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(n_out));
    if (l + 1 < layers) {
      model.prelu_slopes.push_back(Eigen::VectorXd::Constant(n_out, 0.25));
    }
  }
  return model;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& X,
                        bool training, Rng& rng, ForwardCache* cache) {
  check_input(model, X);
  const int layers = model.num_dense_layers();
  std::vector<Eigen::VectorXd> scale(layers);
  for (int l = 0; l < layers; ++l) {
    const int width = model.layer_sizes[l];
    if (training) {
      Eigen::VectorXd s(width);
      for (int i = 0; i < width; ++i) {
        s(i) = rng.next_bernoulli(model.keep_prob) ? 1.0 / model.keep_prob : 0.0;
      }
      scale[l] = s;
    } else {
      scale[l] = Eigen::VectorXd::Ones(width);
    }
  }
  return run_forward(model, X, std::move(scale), cache);
}

Eigen::VectorXd forward_with_masks(const MlpModel& model, const Eigen::MatrixXd& X,
                                   const std::vector<Eigen::VectorXd>& masks,
                                   ForwardCache* cache) {
  check_input(model, X);
  const int layers = model.num_dense_layers();
  if (static_cast<int>(masks.size()) != layers) {
    throw std::invalid_argument("forward_with_masks: need one mask per dense layer");
  }
  std::vector<Eigen::VectorXd> scale(layers);
  for (int l = 0; l < layers; ++l) {
    if (masks[l].size() != model.layer_sizes[l]) {
      throw std::invalid_argument("forward_with_masks: mask size mismatch at layer " +
                                  std::to_string(l));
    }
    scale[l] = masks[l] / model.keep_prob;
  }
  return run_forward(model, X, std::move(scale), cache);
}

double loss(const Eigen::VectorXd& y_star, const Eigen::VectorXd& y_hat) {
  if (y_star.size() != y_hat.size()) {
    throw std::invalid_argument("loss: prediction/label length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_star.size(); ++i) {
    const double p = clamp_prob(y_star(i));
    total -= y_hat(i) * std::log(p) + (1.0 - y_hat(i)) * std::log(1.0 - p);
  }
  return total;
}

Gradients backward(const MlpModel& model, const Eigen::VectorXd& y_hat,
                   const ForwardCache& cache) {
  const int layers = model.num_dense_layers();
  const Eigen::Index n = cache.output.size();
  if (y_hat.size() != n) {
    throw std::invalid_argument("backward: label count does not match cached batch");
  }

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  g.prelu_slopes.resize(layers - 1);

  // d(loss)/d(z_out); the clamp saturates the gradient to zero outside it.
  Eigen::MatrixXd gz(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = cache.output(i);
    gz(i, 0) = (p > kProbClampLo && p < kProbClampHi) ? p - y_hat(i) : 0.0;
  }

  for (int l = layers - 1; l >= 0; --l) {
    g.weights[l] = gz.transpose() * cache.inputs[l];
    g.biases[l] = gz.colwise().sum().transpose();
    if (l == 0) break;

    Eigen::MatrixXd gd = gz * model.weights[l];
    // Through the dropout site feeding layer l.
    Eigen::MatrixXd gy = gd;
    gy.array().rowwise() *= cache.mask_scale[l].transpose().array();

    // Through the PReLU of hidden layer l-1.
    const Eigen::MatrixXd& z = cache.preacts[l - 1];
    Eigen::ArrayXXd pos = (z.array() >= 0.0).cast<double>();
    Eigen::ArrayXXd neg = 1.0 - pos;
    g.prelu_slopes[l - 1] =
        (neg * gy.array() * z.array()).colwise().sum().transpose().matrix();
    Eigen::ArrayXXd coef =
        pos + (neg.rowwise() * model.prelu_slopes[l - 1].transpose().array());
    gz = (gy.array() * coef).matrix();
  }
  return g;
}

AdamState make_adam_state(const MlpModel& model, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& w : model.weights) {
    state.m.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    state.v.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : model.biases) {
    state.m.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    state.v.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  for (const auto& a : model.prelu_slopes) {
    state.m.prelu_slopes.push_back(Eigen::VectorXd::Zero(a.size()));
    state.v.prelu_slopes.push_back(Eigen::VectorXd::Zero(a.size()));
  }
  return state;
}

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads) {
  state.t += 1;
  const AdamConfig& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t l = 0; l < model.weights.size(); ++l) {
    adam_update(model.weights[l], state.m.weights[l], state.v.weights[l],
                grads.weights[l], cfg, bc1, bc2);
    adam_update(model.biases[l], state.m.biases[l], state.v.biases[l],
                grads.biases[l], cfg, bc1, bc2);
  }
  for (size_t l = 0; l < model.prelu_slopes.size(); ++l) {
    adam_update(model.prelu_slopes[l], state.m.prelu_slopes[l],
                state.v.prelu_slopes[l], grads.prelu_slopes[l], cfg, bc1, bc2);
  }
}

TrainResult train(MlpModel& model, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& y, const TrainOptions& opts) {
  if (X.rows() == 0) {
    throw std::invalid_argument("train: empty dataset");
  }
  check_input(model, X);
  if (y.size() != X.rows()) {
    throw std::invalid_argument("train: label count does not match rows");
  }
  bool saw_pos = false;
  bool saw_neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0) {
      saw_pos = true;
    } else if (y(i) == 0.0) {
      saw_neg = true;
    } else {
      throw std::invalid_argument("train: labels must be 0 or 1");
    }
  }
  if (!saw_pos || !saw_neg) {
    throw std::invalid_argument("train: dataset contains a single class; refusing to fit");
  }
  if (opts.batch_size <= 0) {
    throw std::invalid_argument("train: batch_size must be positive");
  }
  if (opts.epochs <= 0) {
    throw std::invalid_argument("train: epochs must be positive");
  }

  Rng rng(opts.seed);
  AdamState adam = make_adam_state(model, opts.adam);
  TrainResult result;

  const int n = static_cast<int>(X.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }

    double total = 0.0;
    for (int start = 0; start < n; start += opts.batch_size) {
      const int count = std::min(opts.batch_size, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + count);
      Eigen::MatrixXd xb = X(idx, Eigen::all);
      Eigen::VectorXd yb = y(idx);

      ForwardCache cache;
      forward(model, xb, true, rng, &cache);
      total += loss(cache.output, yb);
      Gradients grads = backward(model, yb, cache);
      adam_step(model, adam, grads);
      if (!model.all_finite()) {
        throw std::runtime_error("train: non-finite parameter after update");
      }
    }

    result.epoch_mean_loss.push_back(total / n);
    result.epochs_run = epoch;
    if (result.epoch_mean_loss.back() < opts.stop_train_error) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X) {
  Rng unused(0);
  return forward(model, X, false, unused, nullptr);
}

}  // namespace bns
