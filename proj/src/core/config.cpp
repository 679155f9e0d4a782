#include "occult/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "occult/error.hpp"

namespace occult {

namespace {

struct KeyHandler {
  ConfigKey key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::InvalidParams, "config key '" + key + "': '" + value + "' is not " + expected);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  bad_value(key, value, "a finite number");
}

std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

KeyHandler int_key(const char* name, const char* desc, int PipelineConfig::*field) {
  return {{name, desc},
          [=](PipelineConfig& c, const std::string& v) { c.*field = parse_integer<int>(name, v); },
          [=](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

template <typename Get>
KeyHandler double_key(const char* name, const char* desc, Get access) {
  return {{name, desc},
          [=](PipelineConfig& c, const std::string& v) { access(c) = parse_double(name, v); },
          [=](const PipelineConfig& c) { return show(access(c)); }};
}

template <typename Get>
KeyHandler nested_int_key(const char* name, const char* desc, Get access) {
  return {{name, desc},
          [=](PipelineConfig& c, const std::string& v) { access(c) = parse_integer<int>(name, v); },
          [=](const PipelineConfig& c) { return std::to_string(access(c)); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    t.push_back(int_key("n_theta", "projection angles for the Radon transform", &PipelineConfig::n_theta));
    t.push_back(int_key("image_width", "preprocessed mammogram width", &PipelineConfig::image_width));
    t.push_back(int_key("image_height", "preprocessed mammogram height", &PipelineConfig::image_height));
    t.push_back(int_key("classifier_width", "RCDT image width fed to the classifier",
                        &PipelineConfig::classifier_width));
    t.push_back(int_key("classifier_height", "RCDT image height fed to the classifier",
                        &PipelineConfig::classifier_height));
    t.push_back(double_key("clahe_clip_limit", "CLAHE clip limit as a fraction of tile pixels",
                           [](auto& c) -> auto& { return c.clahe.clip_limit; }));
    t.push_back(nested_int_key("clahe_tiles_x", "CLAHE tiles across",
                               [](auto& c) -> auto& { return c.clahe.tiles_x; }));
    t.push_back(nested_int_key("clahe_tiles_y", "CLAHE tiles down",
                               [](auto& c) -> auto& { return c.clahe.tiles_y; }));
    t.push_back(nested_int_key("clahe_bins", "CLAHE histogram bins",
                               [](auto& c) -> auto& { return c.clahe.bins; }));
    t.push_back(int_key("window", "sliding window side", &PipelineConfig::window));
    t.push_back(int_key("stride_x", "horizontal window stride", &PipelineConfig::stride_x));
    t.push_back(int_key("stride_y", "vertical window stride", &PipelineConfig::stride_y));
    t.push_back({{"simulator", "contralateral simulator: mirror or external"},
                 [](PipelineConfig& c, const std::string& v) {
                   if (v == "mirror") {
                     c.simulator.kind = SimulatorKind::Mirror;
                   } else if (v == "external") {
                     c.simulator.kind = SimulatorKind::External;
                   } else {
                     bad_value("simulator", v, "mirror or external");
                   }
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.simulator.kind == SimulatorKind::Mirror ? "mirror" : "external");
                 }});
    t.push_back(double_key("simulator_sigma", "mirror simulator blur sigma in pixels",
                           [](auto& c) -> auto& { return c.simulator.smoothing_sigma; }));
    t.push_back({{"simulator_dir", "directory of precomputed simulated images (external simulator)"},
                 [](PipelineConfig& c, const std::string& v) { c.simulator.external_dir = v; },
                 [](const PipelineConfig& c) { return c.simulator.external_dir.string(); }});
    t.push_back(nested_int_key("phantom_size", "phantom image side in pixels",
                               [](auto& c) -> auto& { return c.phantom.size; }));
    t.push_back(double_key("texture_correlation", "weight of the texture shared by both breasts",
                           [](auto& c) -> auto& { return c.phantom.texture_correlation; }));
    t.push_back(double_key("lesion_contrast", "peak lesion intensity added to cancer cases",
                           [](auto& c) -> auto& { return c.phantom.lesion_contrast; }));
    t.push_back(double_key("lesion_radius", "lesion radius in pixels",
                           [](auto& c) -> auto& { return c.phantom.lesion_radius; }));
    t.push_back(double_key("lesion_jitter", "random lesion displacement in pixels",
                           [](auto& c) -> auto& { return c.phantom.lesion_jitter; }));
    t.push_back(double_key("noise_sigma", "phantom pixel noise",
                           [](auto& c) -> auto& { return c.phantom.noise_sigma; }));
    t.push_back(int_key("n_controls", "generated normal controls", &PipelineConfig::n_controls));
    t.push_back(int_key("n_cancers", "generated cancer cases", &PipelineConfig::n_cancers));
    t.push_back({{"cohort_dir", "read the cohort from this directory instead of generating phantoms"},
                 [](PipelineConfig& c, const std::string& v) { c.cohort_dir = v; },
                 [](const PipelineConfig& c) { return c.cohort_dir.string(); }});
    t.push_back(double_key("learning_rate", "logistic regression step size",
                           [](auto& c) -> auto& { return c.train.learning_rate; }));
    t.push_back(nested_int_key("epochs", "logistic regression epochs",
                               [](auto& c) -> auto& { return c.train.epochs; }));
    t.push_back(double_key("l2", "logistic regression L2 penalty",
                           [](auto& c) -> auto& { return c.train.l2; }));
    t.push_back({{"seed", "seed for phantoms and fold assignment"},
                 [](PipelineConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
                 [](const PipelineConfig& c) { return std::to_string(c.seed); }});
    t.push_back(int_key("folds", "cross-validation folds", &PipelineConfig::folds));
    t.push_back({{"out", "output directory"},
                 [](PipelineConfig& c, const std::string& v) { c.out = v; },
                 [](const PipelineConfig& c) { return c.out.string(); }});
    t.push_back(int_key("jobs", "worker threads, 0 for one per hardware thread", &PipelineConfig::jobs));
    t.push_back(int_key("sample_cases", "cases whose intermediate images are exported",
                        &PipelineConfig::sample_cases));
    return t;
  }();
  return table;
}

const KeyHandler& find_handler(const std::string& key) {
  for (const auto& h : handlers()) {
    if (h.key.name == key) return h;
  }
  fail(ErrorCode::InvalidParams, "unknown config key '" + key + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidParams, "invalid config: " + what);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  find_handler(key).set(config, trim(value));
}

std::string get_config_value(const PipelineConfig& config, const std::string& key) {
  return find_handler(key).get(config);
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) fail(ErrorCode::InvalidParams, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
  validate(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string format_config(const PipelineConfig& config) {
  std::ostringstream out;
  for (const auto& h : handlers()) {
    out << "# " << h.key.description << '\n' << h.key.name << " = " << h.get(config) << '\n';
  }
  return out.str();
}

void validate(const PipelineConfig& c) {
  require(c.n_theta >= 2, "n_theta must be at least 2");
  require(c.image_width >= 2 && c.image_height >= 2, "image size must be at least 2x2");
  require(c.classifier_width >= 2 && c.classifier_height >= 2, "classifier size must be at least 2x2");
  require(c.clahe.clip_limit > 0.0 && c.clahe.clip_limit <= 1.0, "clahe_clip_limit must be in (0, 1]");
  require(c.clahe.tiles_x >= 1 && c.clahe.tiles_y >= 1, "clahe tiles must be at least 1");
  require(c.clahe.bins >= 2, "clahe_bins must be at least 2");
  require(c.image_width / c.clahe.tiles_x >= 2 && c.image_height / c.clahe.tiles_y >= 2,
          "clahe tiles would be smaller than 2x2");
  require(c.window >= 2, "window must be at least 2");
  require(c.stride_x >= 1 && c.stride_y >= 1, "strides must be at least 1");
  require(c.window <= c.classifier_width && c.window <= c.classifier_height,
          "window must fit inside the classifier image");
  require(c.simulator.smoothing_sigma >= 0.0, "simulator_sigma must be nonnegative");
  require(c.simulator.kind != SimulatorKind::External || !c.simulator.external_dir.empty(),
          "the external simulator needs simulator_dir");
  validate(c.phantom);
  require(c.n_controls >= 0 && c.n_cancers >= 0, "case counts must be nonnegative");
  require(c.train.learning_rate > 0.0, "learning_rate must be positive");
  require(c.train.epochs >= 1, "epochs must be at least 1");
  require(c.train.l2 >= 0.0, "l2 must be nonnegative");
  require(c.folds >= 2, "folds must be at least 2");
  require(!c.out.empty(), "out must name a directory");
  require(c.jobs >= 0, "jobs must be nonnegative");
  require(c.sample_cases >= 0, "sample_cases must be nonnegative");
}

}  // namespace occult
