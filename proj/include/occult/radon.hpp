#pragma once

#include <span>
#include <vector>

#include "occult/image.hpp"

namespace occult {

// Parallel-beam projections. Samples are stored one angle after another so a
// single projection is a contiguous span; t is centred on the image centre
// with unit (pixel) spacing, t_i = i - (n_t - 1) / 2.
class Sinogram {
 public:
  Sinogram() = default;
  Sinogram(int n_t, std::vector<double> theta);

  int n_t() const noexcept { return n_t_; }
  int n_theta() const noexcept { return static_cast<int>(theta_.size()); }
  const std::vector<double>& theta() const noexcept { return theta_; }
  double t(int i) const noexcept { return i - 0.5 * (n_t_ - 1); }
  double t_origin() const noexcept { return -0.5 * (n_t_ - 1); }

  double& at(int i_t, int k_theta) { return values_[offset(i_t, k_theta)]; }
  double at(int i_t, int k_theta) const { return values_[offset(i_t, k_theta)]; }

  std::span<double> projection(int k) noexcept {
    return {values_.data() + static_cast<std::size_t>(k) * n_t_, static_cast<std::size_t>(n_t_)};
  }
  std::span<const double> projection(int k) const noexcept {
    return {values_.data() + static_cast<std::size_t>(k) * n_t_, static_cast<std::size_t>(n_t_)};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_grid(const Sinogram& other) const noexcept;

 private:
  std::size_t offset(int i_t, int k) const noexcept {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(n_t_) +
           static_cast<std::size_t>(i_t);
  }

  int n_t_ = 0;
  std::vector<double> theta_;
  std::vector<double> values_;
};

enum class RampWindow { None, Hann };

// Angles k * pi / n_theta, k = 0 .. n_theta - 1.
std::vector<double> uniform_angles(int n_theta);

// Odd detector count covering the image diagonal.
int detector_count(int width, int height);

// Line integrals through a zero-padded Catmull-Rom interpolant of the image,
// sampled along each ray at unit spacing. Throws NegativeInput.
Sinogram radon(const GrayImage& img, int n_theta);

// Ramp-filtered back projection with linear interpolation. Output values are
// not clamped.
GrayImage iradon(const Sinogram& sino, int out_width, int out_height,
                 RampWindow window = RampWindow::None);

}  // namespace occult
