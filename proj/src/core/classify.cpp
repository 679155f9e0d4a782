#include "occult/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "occult/error.hpp"

namespace occult {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Linear-interpolated percentile (q in [0, 1]) of `v`, which is reordered.
double percentile(std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

void channel_features(std::span<const double> px, int w, int h, FeatureVector& out) {
  const auto n = static_cast<double>(px.size());
  double mean = 0.0;
  for (double v : px) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : px) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double sd = std::sqrt(m2);
  // Relative floor so rounding noise on flat windows reads as zero spread.
  const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));
  const double skew = flat ? 0.0 : m3 / (m2 * sd);
  const double kurt = flat ? 0.0 : m4 / (m2 * m2) - 3.0;

  std::vector<double> sorted(px.begin(), px.end());
  const double p05 = percentile(sorted, 0.05);
  const double p50 = percentile(sorted, 0.50);
  const double p90 = percentile(sorted, 0.90);
  const double p95 = percentile(sorted, 0.95);
  const double p99 = percentile(sorted, 0.99);
  double above = 0.0;
  double peak = px.empty() ? 0.0 : px[0];
  for (double v : px) {
    if (v > p90) above += v;
    peak = std::max(peak, v);
  }

  // Central differences (one-sided at the border).
  std::vector<double> grad(px.size());
  auto at = [&](int x, int y) { return px[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
      const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
      const double gx = x1 > x0 ? (at(x1, y) - at(x0, y)) / (x1 - x0) : 0.0;
      const double gy = y1 > y0 ? (at(x, y1) - at(x, y0)) / (y1 - y0) : 0.0;
      grad[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  double gmean = 0.0;
  for (double g : grad) gmean += g;
  gmean /= n;
  double gvar = 0.0;
  for (double g : grad) gvar += (g - gmean) * (g - gmean);
  const double gstd = std::sqrt(gvar / n);

  out.insert(out.end(), {mean, flat ? 0.0 : sd, skew, kurt, p05, p50, p95, p99, above, gmean, gstd, peak});
}

}  // namespace

WindowGrid extract_windows(int width, int height, int window, int stride_x, int stride_y) {
  if (window < 1 || stride_x < 1 || stride_y < 1) {
    fail(ErrorCode::InvalidArgument, "window size and strides must be positive");
  }
  if (width < window || height < window) {
    fail(ErrorCode::WindowTooLarge, "window " + std::to_string(window) + " does not fit a " +
                                        std::to_string(width) + "x" + std::to_string(height) + " image");
  }
  WindowGrid grid{window, stride_x, stride_y, {}};
  for (int y = 0; y + window <= height; y += stride_y) {
    for (int x = 0; x + window <= width; x += stride_x) grid.positions.push_back({x, y});
  }
  return grid;
}

GrayImage crop(const GrayImage& img, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || x + width > img.width() || y + height > img.height()) {
    fail(ErrorCode::WindowTooLarge, "crop outside image bounds");
  }
  GrayImage out(width, height);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) out.at(i, j) = img.at(x + i, y + j);
  }
  return out;
}

RgbImage crop(const RgbImage& img, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || x + width > img.width() || y + height > img.height()) {
    fail(ErrorCode::WindowTooLarge, "crop outside image bounds");
  }
  RgbImage out(width, height);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = img.at(x + i, y + j, c);
    }
  }
  return out;
}

FeatureVector window_features(const GrayImage& window) {
  if (window.empty()) fail(ErrorCode::EmptyInput, "window_features: empty window");
  FeatureVector out;
  out.reserve(kFeaturesPerChannel);
  channel_features(window.pixels(), window.width(), window.height(), out);
  return out;
}

FeatureVector window_features(const RgbImage& window) {
  if (window.empty()) fail(ErrorCode::EmptyInput, "window_features: empty window");
  FeatureVector out;
  out.reserve(3 * kFeaturesPerChannel + 2);
  for (int c = 0; c < 3; ++c) {
    const GrayImage ch = window.channel(c);
    channel_features(ch.pixels(), ch.width(), ch.height(), out);
  }
  const auto px = window.pixels();
  const std::size_t n = px.size() / 3;
  double sum = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(px[3 * i + 1] - px[3 * i]);
    sum += d;
    peak = std::max(peak, d);
  }
  out.push_back(sum / static_cast<double>(n));
  out.push_back(peak);
  return out;
}

std::vector<std::string> feature_names(int channels) {
  static const char* base[kFeaturesPerChannel] = {"mean", "std", "skew", "kurtosis", "p05", "p50",
                                                  "p95", "p99", "energy_above_p90", "grad_mean",
                                                  "grad_std", "max"};
  static const char* rgb[3] = {"r", "g", "b"};
  std::vector<std::string> names;
  for (int c = 0; c < channels; ++c) {
    for (const char* b : base) {
      names.push_back(channels == 1 ? std::string(b) : std::string(rgb[c]) + "_" + b);
    }
  }
  if (channels == 3) {
    names.emplace_back("discord_mean");
    names.emplace_back("discord_max");
  }
  return names;
}

double logistic_objective(std::span<const double> weights, double bias,
                          const std::vector<FeatureVector>& standardized,
                          const std::vector<int>& labels, double l2, std::vector<double>* grad) {
  const std::size_t d = weights.size();
  const auto n = static_cast<double>(standardized.size());
  if (grad) grad->assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < standardized.size(); ++r) {
    const FeatureVector& x = standardized[r];
    double z = bias;
    for (std::size_t j = 0; j < d; ++j) z += weights[j] * x[j];
    const double y = labels[r] != 0 ? 1.0 : 0.0;
    // -[y log s + (1 - y) log(1 - s)] = softplus(z) - y z
    loss += softplus(z) - y * z;
    if (grad) {
      const double residual = sigmoid(z) - y;
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += residual * x[j];
      (*grad)[d] += residual;
    }
  }
  loss /= n;
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  loss += 0.5 * l2 * reg;
  if (grad) {
    for (std::size_t j = 0; j <= d; ++j) (*grad)[j] /= n;
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] += l2 * weights[j];
  }
  return loss;
}

LogisticModel train_logistic(const std::vector<FeatureVector>& features,
                             const std::vector<int>& labels, const TrainOptions& options) {
  if (features.empty()) fail(ErrorCode::EmptyInput, "train_logistic: no training rows");
  if (features.size() != labels.size()) {
    fail(ErrorCode::DimensionMismatch, "train_logistic: feature and label counts differ");
  }
  const std::size_t d = features.front().size();
  if (d == 0) fail(ErrorCode::DimensionMismatch, "train_logistic: zero-length feature vectors");
  for (const auto& row : features) {
    if (row.size() != d) fail(ErrorCode::DimensionMismatch, "train_logistic: ragged feature rows");
    for (double v : row) {
      if (!std::isfinite(v)) fail(ErrorCode::Numerical, "train_logistic: non-finite feature");
    }
  }
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    fail(ErrorCode::SingleClass, "train_logistic: both classes are required");
  }
  if (!(options.learning_rate > 0.0) || options.epochs < 0 || !(options.l2 >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "train_logistic: invalid hyperparameters");
  }

  LogisticModel model;
  model.feature_mean.assign(d, 0.0);
  model.feature_std.assign(d, 0.0);
  const auto n = static_cast<double>(features.size());
  for (const auto& row : features) {
    for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += row[j];
  }
  for (double& m : model.feature_mean) m /= n;
  for (const auto& row : features) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = row[j] - model.feature_mean[j];
      model.feature_std[j] += dv * dv;
    }
  }
  for (double& s : model.feature_std) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
  std::vector<FeatureVector> z(features.size(), FeatureVector(d));
  for (std::size_t r = 0; r < features.size(); ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      z[r][j] = (features[r][j] - model.feature_mean[j]) / model.feature_std[j];
    }
  }

  model.weights.assign(d, 0.0);
  model.bias = 0.0;
  model.epochs = options.epochs;
  model.learning_rate = options.learning_rate;
  model.l2 = options.l2;

  std::vector<double> grad;
  double loss = logistic_objective(model.weights, model.bias, z, labels, options.l2, &grad);
  std::vector<double> trial_w(d);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double step = options.learning_rate;
    double trial_b = model.bias;
    double trial_loss = loss;
    bool moved = false;
    for (int halving = 0; halving < 40; ++halving) {
      for (std::size_t j = 0; j < d; ++j) trial_w[j] = model.weights[j] - step * grad[j];
      trial_b = model.bias - step * grad[d];
      trial_loss = logistic_objective(trial_w, trial_b, z, labels, options.l2, nullptr);
      if (trial_loss <= loss) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (moved) {
      model.weights = trial_w;
      model.bias = trial_b;
      loss = logistic_objective(model.weights, model.bias, z, labels, options.l2, &grad);
    }
    model.loss_history.push_back(loss);
  }
  model.final_loss = loss;
  model.feature_names = feature_names(d == static_cast<std::size_t>(kFeaturesPerChannel) ? 1 : 3);
  if (model.feature_names.size() != d) {
    model.feature_names.clear();
    for (std::size_t j = 0; j < d; ++j) model.feature_names.push_back("f" + std::to_string(j));
  }
  return model;
}

double predict(const LogisticModel& model, std::span<const double> features) {
  if (features.size() != model.dim()) {
    fail(ErrorCode::DimensionMismatch, "predict: expected " + std::to_string(model.dim()) +
                                           " features, got " + std::to_string(features.size()));
  }
  double z = model.bias;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double sd = j < model.feature_std.size() ? model.feature_std[j] : 1.0;
    const double mu = j < model.feature_mean.size() ? model.feature_mean[j] : 0.0;
    z += model.weights[j] * (features[j] - mu) / sd;
  }
  return sigmoid(z);
}

double score_case(std::span<const double> window_scores) {
  if (window_scores.empty()) fail(ErrorCode::EmptyInput, "score_case: no window scores");
  std::vector<double> v(window_scores.begin(), window_scores.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void save_model(const LogisticModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << std::setprecision(17);
  out << "# occult logistic model\n";
  out << "dim " << model.dim() << '\n';
  auto row = [&](const char* key, const auto& values) {
    out << key;
    for (const auto& v : values) out << ' ' << v;
    out << '\n';
  };
  row("names", model.feature_names);
  row("mean", model.feature_mean);
  row("std", model.feature_std);
  row("weights", model.weights);
  out << "bias " << model.bias << '\n'
      << "epochs " << model.epochs << '\n'
      << "learning_rate " << model.learning_rate << '\n'
      << "l2 " << model.l2 << '\n'
      << "final_loss " << model.final_loss << '\n';
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

LogisticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open model " + path.string());
  LogisticModel m;
  std::size_t dim = 0;
  bool have_dim = false, have_weights = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto read_doubles = [&](std::vector<double>& dst) {
      dst.clear();
      double v;
      while (ls >> v) dst.push_back(v);
    };
    if (key == "dim") {
      ls >> dim;
      have_dim = true;
    } else if (key == "names") {
      std::string name;
      while (ls >> name) m.feature_names.push_back(name);
    } else if (key == "mean") {
      read_doubles(m.feature_mean);
    } else if (key == "std") {
      read_doubles(m.feature_std);
    } else if (key == "weights") {
      read_doubles(m.weights);
      have_weights = true;
    } else if (key == "bias") {
      ls >> m.bias;
    } else if (key == "epochs") {
      ls >> m.epochs;
    } else if (key == "learning_rate") {
      ls >> m.learning_rate;
    } else if (key == "l2") {
      ls >> m.l2;
    } else if (key == "final_loss") {
      ls >> m.final_loss;
    } else {
      fail(ErrorCode::UnsupportedFormat, path.string() + ": unknown key " + key);
    }
  }
  if (!have_dim || !have_weights || m.weights.size() != dim || m.feature_mean.size() != dim ||
      m.feature_std.size() != dim || m.feature_names.size() != dim) {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": inconsistent model dimensions");
  }
  return m;
}

}  // namespace occult
