#include "occult/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "occult/error.hpp"

namespace occult {

namespace {

struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// libpng reports errors via longjmp; the frame below holds only trivially
// destructible locals so unwinding through it is safe.
bool read_png_rows(std::FILE* fp, RawRaster& out, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "corrupt PNG stream";
    return false;
  }
  png_init_io(png, fp);
  png_read_png(png, info,
               PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING,
               nullptr);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : (color == PNG_COLOR_TYPE_RGB ? 3 : 0);
  if (channels == 0 || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "unsupported PNG colour type or bit depth";
    return false;
  }
  png_bytepp rows = png_get_rows(png, info);
  out.width = width;
  out.height = height;
  out.channels = channels;
  out.bit_depth = depth;
  out.samples.resize(static_cast<std::size_t>(width) * height * channels);
  std::size_t k = 0;
  for (int y = 0; y < height; ++y) {
    const png_bytep row = rows[y];
    for (int i = 0; i < width * channels; ++i) {
      out.samples[k++] = depth == 16
                             ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                             : static_cast<std::uint16_t>(row[i]);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawRaster read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorCode::UnreadableFile, "cannot open " + path.string());
  RawRaster raster;
  std::string error;
  if (!read_png_rows(fp.get(), raster, error)) {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": " + error);
  }
  return raster;
}

// Netpbm header tokens, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

RawRaster read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open " + path.string());
  if (next_token(in) != "P5") {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": not a PNG or binary PGM file");
  }
  RawRaster r;
  int maxval = 0;
  try {
    r.width = std::stoi(next_token(in));
    r.height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": malformed PGM header");
  }
  if (r.width <= 0 || r.height <= 0 || (maxval != 255 && maxval != 65535)) {
    fail(ErrorCode::UnsupportedFormat,
         path.string() + ": only 8-bit (255) and 16-bit (65535) PGM are supported");
  }
  r.channels = 1;
  r.bit_depth = maxval == 255 ? 8 : 16;
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  const std::size_t bytes = n * (r.bit_depth / 8);
  std::vector<unsigned char> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": truncated PGM data");
  }
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.samples[i] = r.bit_depth == 16
                       ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1])
                       : buf[i];
  }
  return r;
}

RawRaster read_raster(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::UnreadableFile, "no such file: " + path.string());
  }
  return has_png_signature(path) ? read_png(path) : read_pgm(path);
}

std::uint16_t quantize(double v, int maxcode) {
  if (!std::isfinite(v)) v = 0.0;
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxcode));
}

bool write_png_rows(std::FILE* fp, const RawRaster& r, std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  const int bps = r.bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(r.width) * r.channels * bps;
  std::vector<unsigned char> row(row_bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    error = "libpng write error";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height),
               r.bit_depth, r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t per_row = static_cast<std::size_t>(r.width) * r.channels;
  for (int y = 0; y < r.height; ++y) {
    for (std::size_t i = 0; i < per_row; ++i) {
      const std::uint16_t s = r.samples[static_cast<std::size_t>(y) * per_row + i];
      if (bps == 2) {
        row[2 * i] = static_cast<unsigned char>(s >> 8);
        row[2 * i + 1] = static_cast<unsigned char>(s & 0xff);
      } else {
        row[i] = static_cast<unsigned char>(s);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

bool is_pgm_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

void write_raster(const RawRaster& r, const std::filesystem::path& path) {
  if (is_pgm_path(path)) {
    if (r.channels != 1) fail(ErrorCode::IoFailure, "PGM output supports one channel only");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
    out << "P5\n" << r.width << ' ' << r.height << '\n' << (r.bit_depth == 16 ? 65535 : 255) << '\n';
    for (std::uint16_t s : r.samples) {
      if (r.bit_depth == 16) {
        out.put(static_cast<char>(s >> 8));
        out.put(static_cast<char>(s & 0xff));
      } else {
        out.put(static_cast<char>(s));
      }
    }
    if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
    return;
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  std::string error;
  if (!write_png_rows(fp.get(), r, error)) fail(ErrorCode::IoFailure, path.string() + ": " + error);
}

void check_depth(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    fail(ErrorCode::InvalidArgument, "bit depth must be 8 or 16");
  }
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  const RawRaster r = read_raster(path);
  const double maxcode = r.bit_depth == 16 ? 65535.0 : 255.0;
  GrayImage img(r.width, r.height);
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (r.channels == 1) {
      px[i] = r.samples[i] / maxcode;
    } else {
      const double luma = 0.299 * r.samples[3 * i] + 0.587 * r.samples[3 * i + 1] +
                          0.114 * r.samples[3 * i + 2];
      px[i] = std::clamp(luma / maxcode, 0.0, 1.0);
    }
  }
  return img;
}

RgbImage load_rgb_image(const std::filesystem::path& path) {
  const RawRaster r = read_raster(path);
  const double maxcode = r.bit_depth == 16 ? 65535.0 : 255.0;
  RgbImage img(r.width, r.height);
  auto px = img.pixels();
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      px[3 * i + c] = (r.channels == 1 ? r.samples[i] : r.samples[3 * i + c]) / maxcode;
    }
  }
  return img;
}

void save_image(const GrayImage& img, const std::filesystem::path& path, int bit_depth) {
  check_depth(bit_depth);
  const int maxcode = bit_depth == 16 ? 65535 : 255;
  RawRaster r{img.width(), img.height(), 1, bit_depth, {}};
  r.samples.reserve(img.size());
  for (double v : img.pixels()) r.samples.push_back(quantize(v, maxcode));
  write_raster(r, path);
}

void save_image(const RgbImage& img, const std::filesystem::path& path, int bit_depth) {
  check_depth(bit_depth);
  const int maxcode = bit_depth == 16 ? 65535 : 255;
  RawRaster r{img.width(), img.height(), 3, bit_depth, {}};
  r.samples.reserve(img.pixels().size());
  for (double v : img.pixels()) r.samples.push_back(quantize(v, maxcode));
  write_raster(r, path);
}

}  // namespace occult
