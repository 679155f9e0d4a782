#pragma once

#include <filesystem>

#include "occult/image.hpp"

namespace occult {

// Reads PNG or binary PGM (P5), 8- or 16-bit. Samples are divided by the
// bit-depth maximum; colour PNGs are reduced to Rec. 601 luma.
GrayImage load_image(const std::filesystem::path& path);

// Reads an RGB PNG; grayscale inputs are replicated into all three channels.
RgbImage load_rgb_image(const std::filesystem::path& path);

// Format follows the extension: ".pgm" writes P5, anything else PNG.
// Values are clamped to [0, 1] and rounded to the nearest code.
void save_image(const GrayImage& img, const std::filesystem::path& path, int bit_depth = 8);
void save_image(const RgbImage& img, const std::filesystem::path& path, int bit_depth = 8);

}  // namespace occult
