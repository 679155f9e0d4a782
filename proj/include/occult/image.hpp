#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace occult {

// Single-channel raster, row-major, origin top-left, x rightward, y downward.
// Images read from disk or produced by the preprocessing stages hold values in
// [0, 1]; intermediate reconstructions (e.g. filtered back projection) may
// leave that range and are clamped when exported.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Three interleaved channels (R, G, B) per pixel, each in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, double fill = 0.0);
  RgbImage(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y, int channel) { return data_[index(x, y, channel)]; }
  double at(int x, int y, int channel) const {
    return data_[index(x, y, channel)];
  }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }

  GrayImage channel(int c) const;

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

enum class FlipAxis { Horizontal, Vertical };

GrayImage flip(const GrayImage& img, FlipAxis axis);

// Catmull-Rom bicubic resampling with edge clamping; output clamped to [0, 1].
GrayImage resize_bicubic(const GrayImage& img, int new_width, int new_height);

GrayImage clamp01(GrayImage img);
double mean(const GrayImage& img);
bool all_finite(const GrayImage& img);

// Separable Gaussian blur, edge clamped. sigma <= 0 returns the input.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

namespace detail {

// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 from floor(x).
inline std::array<double, 4> catmull_rom_weights(double frac) noexcept {
  const double t = frac;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
          0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)};
}

}  // namespace detail

}  // namespace occult
