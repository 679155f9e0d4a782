#include "occult/fusion.hpp"

#include <cmath>

#include "occult/error.hpp"

namespace occult {

RgbImage fuse_green_magenta(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::GridMismatch, "fuse_green_magenta: input sizes differ");
  }
  RgbImage out(a.width(), a.height());
  auto dst = out.pixels();
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    dst[3 * i] = pb[i];
    dst[3 * i + 1] = pa[i];
    dst[3 * i + 2] = pb[i];
  }
  return out;
}

GrayImage discordance(const RgbImage& fused) {
  GrayImage out(fused.width(), fused.height());
  auto dst = out.pixels();
  const auto src = fused.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(src[3 * i + 1] - src[3 * i]);
  return out;
}

}  // namespace occult
