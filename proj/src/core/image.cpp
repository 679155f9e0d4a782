#include "occult/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "occult/error.hpp"

namespace occult {

namespace {

void check_dims(int width, int height) {
  if (width < 0 || height < 0) {
    fail(ErrorCode::DegenerateSize, "negative image dimensions");
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorCode::DimensionMismatch,
         "pixel buffer of " + std::to_string(data_.size()) + " values does not match " +
             std::to_string(width) + "x" + std::to_string(height));
  }
}

RgbImage::RgbImage(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

RgbImage::RgbImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorCode::DimensionMismatch, "RGB buffer size does not match dimensions");
  }
}

GrayImage RgbImage::channel(int c) const {
  GrayImage out(width_, height_);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = data_[3 * i + static_cast<std::size_t>(c)];
  return out;
}

GrayImage flip(const GrayImage& img, FlipAxis axis) {
  GrayImage out(img.width(), img.height());
  const int w = img.width();
  const int h = img.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (axis == FlipAxis::Horizontal) {
        out.at(w - 1 - x, y) = img.at(x, y);
      } else {
        out.at(x, h - 1 - y) = img.at(x, y);
      }
    }
  }
  return out;
}

GrayImage resize_bicubic(const GrayImage& img, int new_width, int new_height) {
  if (new_width < 2 || new_height < 2) {
    fail(ErrorCode::DegenerateSize, "resize target must be at least 2x2, got " +
                                        std::to_string(new_width) + "x" +
                                        std::to_string(new_height));
  }
  if (img.width() < 1 || img.height() < 1) {
    fail(ErrorCode::DegenerateSize, "cannot resize an empty image");
  }
  const int sw = img.width();
  const int sh = img.height();
  const double sx = static_cast<double>(sw) / new_width;
  const double sy = static_cast<double>(sh) / new_height;

  // Horizontal pass into an intermediate new_width x sh buffer, then vertical.
  struct Taps {
    std::array<int, 4> idx;
    std::array<double, 4> w;
  };
  auto make_taps = [](int n_out, int n_src, double scale) {
    std::vector<Taps> taps(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_out; ++i) {
      const double src = (i + 0.5) * scale - 0.5;
      const double fl = std::floor(src);
      const auto weights = detail::catmull_rom_weights(src - fl);
      Taps& t = taps[static_cast<std::size_t>(i)];
      for (int k = 0; k < 4; ++k) {
        t.idx[static_cast<std::size_t>(k)] =
            std::clamp(static_cast<int>(fl) - 1 + k, 0, n_src - 1);
        t.w[static_cast<std::size_t>(k)] = weights[static_cast<std::size_t>(k)];
      }
    }
    return taps;
  };
  const auto xt = make_taps(new_width, sw, sx);
  const auto yt = make_taps(new_height, sh, sy);

  std::vector<double> tmp(static_cast<std::size_t>(new_width) * static_cast<std::size_t>(sh));
  for (int y = 0; y < sh; ++y) {
    for (int x = 0; x < new_width; ++x) {
      const Taps& t = xt[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += t.w[k] * img.at(t.idx[k], y);
      tmp[static_cast<std::size_t>(y) * new_width + x] = acc;
    }
  }
  GrayImage out(new_width, new_height);
  for (int y = 0; y < new_height; ++y) {
    const Taps& t = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < new_width; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        acc += t.w[k] * tmp[static_cast<std::size_t>(t.idx[k]) * new_width + x];
      }
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

GrayImage clamp01(GrayImage img) {
  for (double& v : img.pixels()) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return img;
}

double mean(const GrayImage& img) {
  if (img.empty()) return 0.0;
  const auto px = img.pixels();
  return std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
}

bool all_finite(const GrayImage& img) {
  const auto px = img.pixels();
  return std::all_of(px.begin(), px.end(), [](double v) { return std::isfinite(v); });
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0.0) || img.empty()) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(std::clamp(x + k, 0, w - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(x, std::clamp(y + k, 0, h - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace occult
