#pragma once

#include "occult/image.hpp"

namespace occult {

// Green-magenta overlay: R = b, G = a, B = b. Equal inputs give gray pixels;
// a > b tints green and b > a tints magenta.
RgbImage fuse_green_magenta(const GrayImage& a, const GrayImage& b);

// |a - b| per pixel, recovered from a fused image as |G - R|.
GrayImage discordance(const RgbImage& fused);

}  // namespace occult
