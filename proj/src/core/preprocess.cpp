#include "occult/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "occult/error.hpp"

namespace occult {

namespace {

int bin_of(double v, int bins) {
  if (!(v > 0.0)) return 0;
  return std::min(bins - 1, static_cast<int>(v * bins));
}

// Labels 8-connected components of `fg` and keeps only the largest one.
// Ties go to the component found first in raster order.
std::vector<unsigned char> largest_component(const std::vector<unsigned char>& fg, int w, int h) {
  std::vector<int> label(fg.size(), 0);
  int best_label = 0;
  std::size_t best_size = 0;
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!fg[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)]) continue;
    ++next;
    std::size_t size = 0;
    stack.push_back(start);
    label[static_cast<std::size_t>(start)] = next;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int px = p % w;
      const int py = p / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto q = static_cast<std::size_t>(ny * w + nx);
          if (fg[q] && !label[q]) {
            label[q] = next;
            stack.push_back(static_cast<int>(q));
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
  }
  std::vector<unsigned char> out(fg.size(), 0);
  for (std::size_t i = 0; i < fg.size(); ++i) out[i] = label[i] == best_label && best_label ? 1 : 0;
  return out;
}

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
    }
  }
  return offs;
}

// Out-of-bounds neighbours are ignored, so closing never shrinks the input.
std::vector<unsigned char> morph(const std::vector<unsigned char>& in, int w, int h,
                                 const std::vector<std::pair<int, int>>& offs, bool dilate) {
  std::vector<unsigned char> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = !dilate;
      for (const auto& [dx, dy] : offs) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const bool s = in[static_cast<std::size_t>(ny * w + nx)] != 0;
        if (dilate && s) {
          v = true;
          break;
        }
        if (!dilate && !s) {
          v = false;
          break;
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = v ? 1 : 0;
    }
  }
  return out;
}

BoundingBox tight_bbox(const std::vector<unsigned char>& m, int w, int h) {
  BoundingBox b{w, h, -1, -1};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m[static_cast<std::size_t>(y * w + x)]) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return b;
}

}  // namespace

std::size_t BreastMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

const char* side_name(Side side) noexcept { return side == Side::Left ? "left" : "right"; }

double otsu_threshold(const GrayImage& img, int bins) {
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (double v : img.pixels()) hist[static_cast<std::size_t>(bin_of(v, bins))] += 1.0;
  const double total = static_cast<double>(img.size());
  double sum_all = 0.0;
  for (int i = 0; i < bins; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_k = -1;
  for (int k = 0; k < bins - 1; ++k) {
    w0 += hist[static_cast<std::size_t>(k)];
    sum0 += k * hist[static_cast<std::size_t>(k)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  if (best_k < 0) {
    // Single occupied bin: everything above zero counts as foreground.
    return 0.0;
  }
  return static_cast<double>(best_k + 1) / bins;
}

BreastMask segment_breast(const GrayImage& img, int closing_radius) {
  if (img.empty()) fail(ErrorCode::DegenerateSize, "segment_breast: empty image");
  const int w = img.width();
  const int h = img.height();
  const double thr = otsu_threshold(img);
  std::vector<unsigned char> fg(img.size(), 0);
  bool any = false;
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const bool on = thr > 0.0 ? px[i] >= thr : px[i] > 0.0;
    fg[i] = on ? 1 : 0;
    any = any || on;
  }
  if (!any) fail(ErrorCode::NoForeground, "segment_breast: no pixel above threshold");

  auto mask = largest_component(fg, w, h);
  if (closing_radius > 0) {
    const auto offs = disk_offsets(closing_radius);
    mask = morph(morph(mask, w, h, offs, true), w, h, offs, false);
    mask = largest_component(mask, w, h);
  }
  BreastMask out;
  out.width = w;
  out.height = h;
  out.bbox = tight_bbox(mask, w, h);
  out.mask = std::move(mask);
  return out;
}

GrayImage crop_resize_to(const GrayImage& img, const BreastMask& mask, int target_width,
                         int target_height) {
  if (mask.width != img.width() || mask.height != img.height()) {
    fail(ErrorCode::DimensionMismatch, "crop_resize_to: mask and image sizes differ");
  }
  const BoundingBox& b = mask.bbox;
  if (b.x1 < b.x0 || b.y1 < b.y0) fail(ErrorCode::NoForeground, "crop_resize_to: empty mask");
  GrayImage crop(b.width(), b.height());
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      crop.at(x - b.x0, y - b.y0) = mask.at(x, y) ? img.at(x, y) : 0.0;
    }
  }
  return resize_bicubic(crop, target_width, target_height);
}

GrayImage standardize_orientation(const GrayImage& img, Side side) {
  return side == Side::Right ? flip(img, FlipAxis::Horizontal) : img;
}

GrayImage preprocess_view(const GrayImage& img, Side side, int target_width, int target_height) {
  const BreastMask mask = segment_breast(img);
  return standardize_orientation(crop_resize_to(img, mask, target_width, target_height), side);
}

GrayImage clahe(const GrayImage& img, const ClaheParams& params) {
  if (!(params.clip_limit > 0.0 && params.clip_limit <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "clahe: clip_limit must lie in (0, 1]");
  }
  if (params.tiles_x < 1 || params.tiles_y < 1 || params.bins < 2) {
    fail(ErrorCode::InvalidArgument, "clahe: need at least one tile per axis and two bins");
  }
  const int w = img.width();
  const int h = img.height();
  if (w / params.tiles_x < 2 || h / params.tiles_y < 2) {
    fail(ErrorCode::DegenerateSize, "clahe: tiles would be smaller than 2x2");
  }
  const int nx = params.tiles_x;
  const int ny = params.tiles_y;
  const int bins = params.bins;

  // Bins span the image's own intensity range.
  const auto [lo_it, hi_it] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const double lo = *lo_it;
  const double scale = *hi_it > lo ? 1.0 / (*hi_it - lo) : 0.0;
  auto bin = [&](double v) { return static_cast<std::size_t>(bin_of((v - lo) * scale, bins)); };

  auto edge = [](int i, int n, int len) { return static_cast<int>(static_cast<long>(i) * len / n); };

  // Mapping table per tile: maps[(ty * nx + tx) * bins + b] in [0, 1].
  std::vector<double> maps(static_cast<std::size_t>(nx) * ny * bins);
  std::vector<double> hist(static_cast<std::size_t>(bins));
  for (int ty = 0; ty < ny; ++ty) {
    for (int tx = 0; tx < nx; ++tx) {
      std::fill(hist.begin(), hist.end(), 0.0);
      const int x0 = edge(tx, nx, w), x1 = edge(tx + 1, nx, w);
      const int y0 = edge(ty, ny, h), y1 = edge(ty + 1, ny, h);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) hist[bin(img.at(x, y))] += 1.0;
      }
      const double n = static_cast<double>((x1 - x0) * (y1 - y0));
      const double clip = params.clip_limit * n;
      double excess = 0.0;
      for (double& c : hist) {
        if (c > clip) {
          excess += c - clip;
          c = clip;
        }
      }
      const double share = excess / bins;
      double cum = 0.0;
      double* map = &maps[(static_cast<std::size_t>(ty) * nx + tx) * bins];
      for (int b = 0; b < bins; ++b) {
        cum += hist[static_cast<std::size_t>(b)] + share;
        map[b] = std::clamp(cum / n, 0.0, 1.0);
      }
    }
  }

  // Tile centres along each axis for bilinear blending.
  auto centres = [&](int n, int len) {
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = 0.5 * (edge(i, n, len) + edge(i + 1, n, len) - 1);
    return c;
  };
  const auto cx = centres(nx, w);
  const auto cy = centres(ny, h);
  auto locate = [](const std::vector<double>& c, double p, int& i0, int& i1, double& frac) {
    const int n = static_cast<int>(c.size());
    if (p <= c.front()) {
      i0 = i1 = 0;
      frac = 0.0;
      return;
    }
    if (p >= c.back()) {
      i0 = i1 = n - 1;
      frac = 0.0;
      return;
    }
    int k = 0;
    while (k + 1 < n && c[static_cast<std::size_t>(k + 1)] < p) ++k;
    i0 = k;
    i1 = k + 1;
    frac = (p - c[static_cast<std::size_t>(k)]) / (c[static_cast<std::size_t>(k + 1)] - c[static_cast<std::size_t>(k)]);
  };

  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    int ty0, ty1;
    double fy;
    locate(cy, y, ty0, ty1, fy);
    for (int x = 0; x < w; ++x) {
      int tx0, tx1;
      double fx;
      locate(cx, x, tx0, tx1, fx);
      const auto b = bin(img.at(x, y));
      auto m = [&](int ty, int tx) { return maps[(static_cast<std::size_t>(ty) * nx + tx) * bins + b]; };
      const double top = (1.0 - fx) * m(ty0, tx0) + fx * m(ty0, tx1);
      const double bot = (1.0 - fx) * m(ty1, tx0) + fx * m(ty1, tx1);
      out.at(x, y) = std::clamp((1.0 - fy) * top + fy * bot, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace occult
