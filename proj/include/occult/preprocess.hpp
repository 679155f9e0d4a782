#pragma once

#include <vector>

#include "occult/image.hpp"

namespace occult {

enum class Side { Left, Right };

struct BoundingBox {
  int x0 = 0;  // inclusive
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  bool operator==(const BoundingBox&) const = default;
};

struct BreastMask {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> mask;  // 1 = breast
  BoundingBox bbox;

  bool at(int x, int y) const {
    return mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)] != 0;
  }
  std::size_t count() const;
};

struct ClaheParams {
  double clip_limit = 0.01;
  int tiles_x = 8;
  int tiles_y = 8;
  int bins = 256;
};

// Otsu threshold on a 256-bin histogram, largest 8-connected component,
// closing with a disk of radius closing_radius. Throws NoForeground.
BreastMask segment_breast(const GrayImage& img, int closing_radius = 5);

// Threshold (in intensity units) chosen by Otsu's criterion.
double otsu_threshold(const GrayImage& img, int bins = 256);

// Zeroes pixels outside the mask, crops to its bounding box, and resizes.
GrayImage crop_resize_to(const GrayImage& img, const BreastMask& mask, int target_width,
                         int target_height);

// Right-side views are flipped horizontally so every breast shares the
// left-side orientation (chest wall on the left edge).
GrayImage standardize_orientation(const GrayImage& img, Side side);

// Contrast limited adaptive histogram equalization with bilinear blending of
// per-tile mappings. Histogram bins span the image's [min, max] range.
GrayImage clahe(const GrayImage& img, const ClaheParams& params = {});

// segment_breast + crop_resize_to + standardize_orientation.
GrayImage preprocess_view(const GrayImage& img, Side side, int target_width, int target_height);

const char* side_name(Side side) noexcept;

}  // namespace occult
