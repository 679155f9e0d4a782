#include "occult/radon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "occult/error.hpp"

namespace occult {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        real_(fftw_buffer<double>(static_cast<std::size_t>(n))),
        spec_(fftw_buffer<fftw_complex>(static_cast<std::size_t>(n / 2 + 1))) {
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, real_.get(), spec_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(n, spec_.get(), real_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() noexcept { return real_.get(); }
  fftw_complex* spectrum() noexcept { return spec_.get(); }
  void forward() noexcept { fftw_execute(forward_); }
  // Unnormalized: the result is n times the true inverse.
  void backward() noexcept { fftw_execute(backward_); }
  int size() const noexcept { return n_; }

 private:
  int n_;
  std::unique_ptr<double[], FftwFree> real_;
  std::unique_ptr<fftw_complex[], FftwFree> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Frequency response of the band-limited ramp (Ram-Lak) kernel with unit
// sample spacing: h[0] = 1/4, h[odd n] = -1/(pi n)^2, h[even n] = 0.
std::vector<double> ramp_response(RealFft& fft, RampWindow window) {
  const int p = fft.size();
  double* h = fft.real();
  for (int i = 0; i < p; ++i) {
    const int n = i <= p / 2 ? i : i - p;
    if (n == 0) {
      h[i] = 0.25;
    } else if (n % 2 != 0) {
      h[i] = -1.0 / (std::numbers::pi * std::numbers::pi * n * n);
    } else {
      h[i] = 0.0;
    }
  }
  fft.forward();
  std::vector<double> resp(static_cast<std::size_t>(p / 2 + 1));
  for (int k = 0; k <= p / 2; ++k) {
    double r = fft.spectrum()[k][0];
    if (window == RampWindow::Hann) r *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * k / p));
    resp[static_cast<std::size_t>(k)] = r;
  }
  return resp;
}

// Accumulates line integrals over `lines` rows of length `len`. On line j the
// ray with detector coordinate t crosses the line at
//   p(t) = centre_p - (j - centre_j) * slope + t * step,
// where the row is resampled with 1D Catmull-Rom weights (zero outside) and
// each sample is weighted by the path length |step| between adjacent lines.
// `data` rows carry kPad zeros on both sides.
constexpr int kPad = 3;

void project_lines(const double* data, int len, int lines, double centre_p, double centre_j,
                   double slope, double step, double half, std::span<double> proj) {
  const int n_t = static_cast<int>(proj.size());
  const int stride = len + 2 * kPad;
  const double weight = std::abs(step);
  for (int j = 0; j < lines; ++j) {
    const double* row = data + static_cast<std::size_t>(j) * stride + kPad;
    const double p0 = centre_p - (j - centre_j) * slope;
    // Interpolant support is (-2, len + 1).
    double tlo = (-2.0 - p0) / step + half;
    double thi = (len + 1.0 - p0) / step + half;
    if (tlo > thi) std::swap(tlo, thi);
    const int i0 = std::max(0, static_cast<int>(std::ceil(tlo)));
    const int i1 = std::min(n_t - 1, static_cast<int>(std::floor(thi)));
    double* out = proj.data();
    for (int i = i0; i <= i1; ++i) {
      // p + kPad > 0 on the clipped range, so truncation is floor.
      const double p = p0 + (i - half) * step + kPad;
      const int ip = static_cast<int>(p);
      const double f = p - ip;
      const double f2 = f * f;
      const double f3 = f2 * f;
      const double* r = row + ip - kPad - 1;
      const double v = 0.5 * ((-f3 + 2.0 * f2 - f) * r[0] + (3.0 * f3 - 5.0 * f2 + 2.0) * r[1] +
                              (-3.0 * f3 + 4.0 * f2 + f) * r[2] + (f3 - f2) * r[3]);
      out[i] += weight * v;
    }
  }
}

std::vector<double> padded_rows(const double* src, int len, int lines, bool transpose) {
  const int stride = len + 2 * kPad;
  std::vector<double> out(static_cast<std::size_t>(stride) * lines, 0.0);
  for (int j = 0; j < lines; ++j) {
    for (int i = 0; i < len; ++i) {
      out[static_cast<std::size_t>(j) * stride + kPad + i] =
          transpose ? src[static_cast<std::size_t>(i) * lines + j]
                    : src[static_cast<std::size_t>(j) * len + i];
    }
  }
  return out;
}

}  // namespace

Sinogram::Sinogram(int n_t, std::vector<double> theta) : n_t_(n_t), theta_(std::move(theta)) {
  if (n_t < 1) fail(ErrorCode::DegenerateSize, "sinogram needs at least one detector");
  for (std::size_t k = 1; k < theta_.size(); ++k) {
    if (!(theta_[k] > theta_[k - 1])) {
      fail(ErrorCode::InvalidArgument, "sinogram angles must be strictly increasing");
    }
  }
  values_.assign(static_cast<std::size_t>(n_t) * theta_.size(), 0.0);
}

bool Sinogram::same_grid(const Sinogram& other) const noexcept {
  return n_t_ == other.n_t_ && theta_ == other.theta_;
}

std::vector<double> uniform_angles(int n_theta) {
  if (n_theta < 1) fail(ErrorCode::TooFewAngles, "need at least one projection angle");
  std::vector<double> theta(static_cast<std::size_t>(n_theta));
  for (int k = 0; k < n_theta; ++k) theta[static_cast<std::size_t>(k)] = k * std::numbers::pi / n_theta;
  return theta;
}

int detector_count(int width, int height) {
  const int n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(width) * width +
                                                     static_cast<double>(height) * height)));
  return n % 2 == 0 ? n + 1 : n;
}

Sinogram radon(const GrayImage& img, int n_theta) {
  for (double v : img.pixels()) {
    if (v < 0.0 || !std::isfinite(v)) {
      fail(ErrorCode::NegativeInput, "radon: image contains negative or non-finite values");
    }
  }
  const int w = img.width();
  const int h = img.height();
  const int n_t = detector_count(w, h);
  Sinogram sino(n_t, uniform_angles(n_theta));
  if (img.empty()) return sino;

  // Row-major and transposed copies so both stepping directions read
  // contiguous memory.
  const std::vector<double> rows = padded_rows(img.pixels().data(), w, h, false);
  const std::vector<double> cols = padded_rows(img.pixels().data(), h, w, true);
  const double half = 0.5 * (n_t - 1);

  for (int k = 0; k < n_theta; ++k) {
    const double th = sino.theta()[static_cast<std::size_t>(k)];
    const double c = std::cos(th);
    const double s = std::sin(th);
    auto proj = sino.projection(k);
    if (std::abs(c) >= std::abs(s)) {
      project_lines(rows.data(), w, h, 0.5 * (w - 1), 0.5 * (h - 1), s / c, 1.0 / c,
                    half, proj);
    } else {
      project_lines(cols.data(), h, w, 0.5 * (h - 1), 0.5 * (w - 1), c / s, 1.0 / s,
                    half, proj);
    }
    // Catmull-Rom overshoot at sharp edges can dip slightly below zero.
    for (double& v : proj) v = std::max(v, 0.0);
  }
  return sino;
}

GrayImage iradon(const Sinogram& sino, int out_width, int out_height, RampWindow window) {
  if (sino.n_theta() < 2) fail(ErrorCode::TooFewAngles, "iradon: need at least two angles");
  if (out_width < 1 || out_height < 1) fail(ErrorCode::DegenerateSize, "iradon: empty output");
  const int n_t = sino.n_t();
  const int n_theta = sino.n_theta();
  if (n_t < 2) fail(ErrorCode::DegenerateSize, "iradon: need at least two detector samples");

  RealFft fft(next_pow2(std::max(64, 2 * n_t)));
  const std::vector<double> response = ramp_response(fft, window);
  const int p = fft.size();

  std::vector<double> filtered(static_cast<std::size_t>(n_t) * n_theta);
  for (int k = 0; k < n_theta; ++k) {
    const auto proj = sino.projection(k);
    double* buf = fft.real();
    std::fill(buf, buf + p, 0.0);
    std::copy(proj.begin(), proj.end(), buf);
    fft.forward();
    for (int f = 0; f <= p / 2; ++f) {
      fft.spectrum()[f][0] *= response[static_cast<std::size_t>(f)];
      fft.spectrum()[f][1] *= response[static_cast<std::size_t>(f)];
    }
    fft.backward();
    double* dst = filtered.data() + static_cast<std::size_t>(k) * n_t;
    for (int i = 0; i < n_t; ++i) dst[i] = buf[i] / p;
  }

  GrayImage out(out_width, out_height);
  const double cx = 0.5 * (out_width - 1);
  const double cy = 0.5 * (out_height - 1);
  const double origin = sino.t_origin();
  const double scale = std::numbers::pi / n_theta;
  double* dst = out.pixels().data();
  for (int k = 0; k < n_theta; ++k) {
    const double th = sino.theta()[static_cast<std::size_t>(k)];
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double* q = filtered.data() + static_cast<std::size_t>(k) * n_t;
    for (int y = 0; y < out_height; ++y) {
      const double row_t = (y - cy) * s - cx * c - origin;
      double* line = dst + static_cast<std::size_t>(y) * out_width;
      for (int x = 0; x < out_width; ++x) {
        const double pos = row_t + x * c;
        if (!(pos >= 0.0) || pos > n_t - 1) continue;
        const int i0 = std::min(static_cast<int>(pos), n_t - 2);
        const double a = pos - i0;
        line[x] += (1.0 - a) * q[i0] + a * q[i0 + 1];
      }
    }
  }
  for (double& v : out.pixels()) v *= scale;
  return out;
}

}  // namespace occult
