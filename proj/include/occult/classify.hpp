#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "occult/image.hpp"

namespace occult {

struct WindowPosition {
  int x = 0;
  int y = 0;
  bool operator==(const WindowPosition&) const = default;
};

struct WindowGrid {
  int window = 224;
  int stride_x = 5;
  int stride_y = 35;
  std::vector<WindowPosition> positions;  // top-left corners, row-major
};

// x runs from 0 in steps of stride_x while x + window <= width, likewise y.
// Throws WindowTooLarge.
WindowGrid extract_windows(int width, int height, int window = 224, int stride_x = 5,
                           int stride_y = 35);

GrayImage crop(const GrayImage& img, int x, int y, int width, int height);
RgbImage crop(const RgbImage& img, int x, int y, int width, int height);

using FeatureVector = std::vector<double>;

inline constexpr int kFeaturesPerChannel = 12;

// Per channel: mean, std, skewness, excess kurtosis, 5th/50th/95th/99th
// percentiles, summed intensity above the 90th percentile, gradient magnitude
// mean and std, maximum.
FeatureVector window_features(const GrayImage& window);
// Channels R, G, B in order, then mean and max of the discordance |G - R|.
FeatureVector window_features(const RgbImage& window);

std::vector<std::string> feature_names(int channels);

struct TrainOptions {
  double learning_rate = 0.5;
  int epochs = 300;
  double l2 = 1e-3;
};

struct LogisticModel {
  std::vector<std::string> feature_names;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::vector<double> weights;
  double bias = 0.0;
  int epochs = 0;
  double learning_rate = 0.0;
  double l2 = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // one entry per epoch, not persisted

  std::size_t dim() const noexcept { return weights.size(); }
};

// Mean cross-entropy plus l2 / 2 * |w|^2 (bias unpenalized) over already
// standardized rows; grad has dim() + 1 entries with the bias last.
double logistic_objective(std::span<const double> weights, double bias,
                          const std::vector<FeatureVector>& standardized,
                          const std::vector<int>& labels, double l2, std::vector<double>* grad);

// Full-batch gradient descent on standardized features. A step that would
// raise the loss is halved until it does not, so the loss never increases.
// Throws SingleClass, DimensionMismatch, EmptyInput.
LogisticModel train_logistic(const std::vector<FeatureVector>& features,
                             const std::vector<int>& labels, const TrainOptions& options = {});

double predict(const LogisticModel& model, std::span<const double> features);

// Median of the window scores; an even count averages the middle two.
double score_case(std::span<const double> window_scores);

void save_model(const LogisticModel& model, const std::filesystem::path& path);
LogisticModel load_model(const std::filesystem::path& path);

}  // namespace occult
