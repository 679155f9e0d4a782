#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occult/classify.hpp"
#include "occult/phantom.hpp"
#include "occult/preprocess.hpp"
#include "occult/simulate.hpp"

namespace occult {

struct PipelineConfig {
  int n_theta = 180;
  int image_width = 500;   // preprocessed mammogram size
  int image_height = 800;
  int classifier_width = 250;  // RCDT images are resized to this before windowing
  int classifier_height = 400;
  ClaheParams clahe;
  int window = 224;
  int stride_x = 5;
  int stride_y = 35;
  SimulatorSpec simulator;
  PhantomParams phantom;
  int n_controls = 100;
  int n_cancers = 50;
  // When set, the cohort is read from this directory (manifest.csv plus one
  // image per view) instead of being generated.
  std::filesystem::path cohort_dir;
  TrainOptions train;
  std::uint64_t seed = 1;
  int folds = 5;
  std::filesystem::path out = "occult_out";
  int jobs = 0;           // 0 = one worker per hardware thread
  int sample_cases = 2;   // cases whose intermediate images are exported
};

struct ConfigKey {
  std::string name;
  std::string description;
};

// Every recognised key, in the order format_config writes them.
const std::vector<ConfigKey>& config_keys();

// Throws InvalidParams for an unknown key or an unparsable value.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

// key = value lines; blank lines and text after '#' are ignored. Keys not in
// the file keep their defaults. The result is validated.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::string& origin = "<string>");

// Writes every key with its current value; parse_config reads it back.
std::string format_config(const PipelineConfig& config);

// Checks every field against the preconditions of the stage that uses it.
// Throws InvalidParams.
void validate(const PipelineConfig& config);

}  // namespace occult
