#pragma once

#include <filesystem>
#include <string>

#include "occult/image.hpp"

namespace occult {

enum class SimulatorKind { Mirror, External };

struct SimulatorSpec {
  SimulatorKind kind = SimulatorKind::Mirror;
  double smoothing_sigma = 2.0;          // mirror only, pixels
  std::filesystem::path external_dir;    // external only
};

// File name an external generator must use: <case_id>_<view>_sim.png, where
// view names the simulated image (e.g. "right_cc").
std::string external_image_name(const std::string& case_id, const std::string& view);

// Simulates the opposite-side breast from `input`. Mirror: horizontal flip,
// then Gaussian blur. External: loads <external_dir>/<case_id>_<view>_sim.png
// and requires it to match the input size.
GrayImage simulate_contralateral(const GrayImage& input, const SimulatorSpec& spec,
                                 const std::string& case_id, const std::string& view);

}  // namespace occult
