#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bns/calibration.hpp"
#include "bns/features.hpp"
#include "bns/net.hpp"

namespace bns {

// Everything needed to score new files: the trained net, the calibration
// sample sets, and which feature blocks the input layer was built from.
struct ModelBundle {
  MlpModel model;
  calibration::CalibrationModel calibration;
  std::vector<features::Block> mask_blocks;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_loss = 0.0;
};

// Format "BNSM1": one line of JSON (layer sizes, keep_prob, seed, mask,
// training metadata, calibration arrays), then the parameters as raw
// little-endian 64-bit floats in layer order (W row-major, b, PReLU slopes).
void write_model(const std::string& path, const ModelBundle& bundle);

// Throws std::runtime_error on unreadable files, corrupt headers, or a
// version tag other than BNSM1 (named explicitly in the message).
ModelBundle read_model(const std::string& path);

}  // namespace bns
