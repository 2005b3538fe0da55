#include "bns/model_io.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bns {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model blob layout assumes a little-endian host");

constexpr const char* kFormatTag = "BNSM1";

std::size_t param_count(const MlpModel& m) {
  std::size_t count = 0;
  for (const auto& w : m.weights) count += static_cast<std::size_t>(w.size());
  for (const auto& b : m.biases) count += static_cast<std::size_t>(b.size());
  for (const auto& a : m.prelu_slopes) count += static_cast<std::size_t>(a.size());
  return count;
}

void append_row_major(std::vector<double>& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out.push_back(m(r, c));
    }
  }
}

}  // namespace

void write_model(const std::string& path, const ModelBundle& bundle) {
  nlohmann::json header;
  header["format"] = kFormatTag;
  header["layer_sizes"] = bundle.model.layer_sizes;
  header["keep_prob"] = bundle.model.keep_prob;
  header["seed"] = bundle.seed;
  header["epochs_run"] = bundle.epochs_run;
  header["final_loss"] = bundle.final_loss;

  std::vector<std::string> mask_names;
  for (features::Block b : bundle.mask_blocks) {
    mask_names.emplace_back(features::kBlockNames[static_cast<std::size_t>(b)]);
  }
  header["mask_blocks"] = mask_names;

  header["calibration"] = {
      {"bandwidth", bundle.calibration.bandwidth},
      {"base_rate", bundle.calibration.base_rate},
      {"benign_scores", bundle.calibration.benign_scores},
      {"malware_scores", bundle.calibration.malware_scores},
  };

  std::vector<double> params;
  params.reserve(param_count(bundle.model));
  const int layers = bundle.model.num_dense_layers();
  for (int l = 0; l < layers; ++l) {
    append_row_major(params, bundle.model.weights[l]);
    for (Eigen::Index i = 0; i < bundle.model.biases[l].size(); ++i) {
      params.push_back(bundle.model.biases[l](i));
    }
    if (l < layers - 1) {
      for (Eigen::Index i = 0; i < bundle.model.prelu_slopes[l].size(); ++i) {
        params.push_back(bundle.model.prelu_slopes[l](i));
      }
    }
  }
  header["param_count"] = params.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_model: cannot open " + path);
  }
  const std::string line = header.dump();
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) {
    throw std::runtime_error("write_model: short write to " + path);
  }
}

ModelBundle read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("read_model: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw std::runtime_error("read_model: missing header line in " + path);
  }

  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw std::runtime_error("read_model: corrupt header in " + path);
  }
  const std::string format = header.value("format", "");
  if (format != kFormatTag) {
    throw std::runtime_error("read_model: version mismatch in " + path +
                             ": expected " + kFormatTag + ", found '" + format + "'");
  }

  ModelBundle bundle;
  bundle.model.layer_sizes = header.at("layer_sizes").get<std::vector<int>>();
  if (bundle.model.layer_sizes.size() < 2) {
    throw std::runtime_error("read_model: bad layer_sizes in " + path);
  }
  bundle.model.keep_prob = header.at("keep_prob").get<double>();
  bundle.seed = header.at("seed").get<std::uint64_t>();
  bundle.epochs_run = header.at("epochs_run").get<int>();
  bundle.final_loss = header.at("final_loss").get<double>();

  for (const auto& name : header.at("mask_blocks")) {
    const auto block = features::block_from_name(name.get<std::string>());
    if (!block) {
      throw std::runtime_error("read_model: unknown feature block '" +
                               name.get<std::string>() + "' in " + path);
    }
    bundle.mask_blocks.push_back(*block);
  }

  const auto& cal = header.at("calibration");
  bundle.calibration.bandwidth = cal.at("bandwidth").get<double>();
  bundle.calibration.base_rate = cal.at("base_rate").get<double>();
  bundle.calibration.benign_scores = cal.at("benign_scores").get<std::vector<double>>();
  bundle.calibration.malware_scores = cal.at("malware_scores").get<std::vector<double>>();

  const auto& sizes = bundle.model.layer_sizes;
  const int layers = static_cast<int>(sizes.size()) - 1;
  std::size_t expected = 0;
  for (int l = 0; l < layers; ++l) {
    expected += static_cast<std::size_t>(sizes[l + 1]) * sizes[l];  // W
    expected += static_cast<std::size_t>(sizes[l + 1]);             // b
    if (l < layers - 1) expected += static_cast<std::size_t>(sizes[l + 1]);  // a
  }
  const std::size_t declared = header.at("param_count").get<std::size_t>();
  if (declared != expected) {
    throw std::runtime_error("read_model: param_count does not match layer_sizes in " + path);
  }

  std::vector<double> params(expected);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(expected * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(double)) {
    throw std::runtime_error("read_model: truncated parameter blob in " + path);
  }

  std::size_t p = 0;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = params[p++];
      }
    }
    bundle.model.weights.push_back(std::move(w));
    Eigen::VectorXd b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = params[p++];
    bundle.model.biases.push_back(std::move(b));
    if (l < layers - 1) {
      Eigen::VectorXd a(sizes[l + 1]);
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = params[p++];
      bundle.model.prelu_slopes.push_back(std::move(a));
    }
  }
  return bundle;
}

}  // namespace bns
