#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occult/error.hpp"
#include "occult/phantom.hpp"
#include "occult/preprocess.hpp"
#include "support/support.hpp"

using namespace occult;
using testsupport::Rng;

namespace {

double iou(const BreastMask& m, const std::vector<unsigned char>& truth) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool a = m.mask[i] != 0, b = truth[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double stddev(const GrayImage& img) {
  const double m = mean(img);
  double s = 0.0;
  for (double v : img.pixels()) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(img.size()));
}

}  // namespace

TEST_CASE("segmentation matches the phantom ground truth") {
  PhantomParams p;
  p.size = 256;
  p.lesion_radius = 10;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const CaseRecord rec = generate_case(seed, p, Label::Cancer);
    for (Side s : {Side::Left, Side::Right}) {
      for (View v : {View::Cc, View::Mlo}) {
        const PhantomView& pv = rec.view(s, v);
        CHECK(iou(segment_breast(pv.image), pv.breast_mask) >= 0.95);
      }
    }
  }
}

TEST_CASE("segmentation keeps the largest blob only") {
  GrayImage img(120, 80);
  const GrayImage big = testsupport::smooth_ellipse(120, 80, 40, 40, 30, 30, 0.8, 0.05);
  const GrayImage small = testsupport::smooth_ellipse(120, 80, 100, 40, 9.5, 9.5, 0.8, 0.05);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = big.pixels()[i] + small.pixels()[i];
  const BreastMask m = segment_breast(img);
  CHECK(m.bbox.x1 < 75);
  CHECK_FALSE(m.at(100, 40));
  CHECK(m.at(40, 40));
}

TEST_CASE("segmentation of a black image fails") {
  CHECK_THROWS_AS(segment_breast(GrayImage(32, 32)), Error);
  try {
    segment_breast(GrayImage(32, 32));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoForeground);
  }
}

TEST_CASE("bounding box is tight and the mask is one component") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 60 + rng.below(60), h = 60 + rng.below(60);
    const GrayImage img = testsupport::smooth_ellipse(w, h, rng.uniform(20, w - 20.0), rng.uniform(20, h - 20.0),
                                                      rng.uniform(8, 18), rng.uniform(8, 18), 0.7, 0.2);
    const BreastMask m = segment_breast(img);
    bool top = false, bottom = false, left = false, right = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!m.at(x, y)) continue;
        CHECK(x >= m.bbox.x0);
        CHECK(x <= m.bbox.x1);
        CHECK(y >= m.bbox.y0);
        CHECK(y <= m.bbox.y1);
        top |= y == m.bbox.y0;
        bottom |= y == m.bbox.y1;
        left |= x == m.bbox.x0;
        right |= x == m.bbox.x1;
      }
    }
    CHECK((top && bottom && left && right));

    // Flood fill from one mask pixel reaches every mask pixel.
    std::vector<unsigned char> seen(m.mask.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int x = m.bbox.x0; x <= m.bbox.x1 && stack.empty(); ++x)
      if (m.at(x, m.bbox.y0)) stack.emplace_back(x, m.bbox.y0);
    std::size_t reached = 0;
    while (!stack.empty()) {
      auto [x, y] = stack.back();
      stack.pop_back();
      if (x < 0 || y < 0 || x >= w || y >= h || !m.at(x, y)) continue;
      auto& s = seen[static_cast<std::size_t>(y) * w + x];
      if (s) continue;
      s = 1;
      ++reached;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) stack.emplace_back(x + dx, y + dy);
    }
    CHECK(reached == m.count());
  }
}

TEST_CASE("crop_resize_to") {
  Rng rng(4);
  SUBCASE("full-frame mask is a pure resize") {
    const GrayImage img = testsupport::random_image(rng, 40, 30);
    BreastMask m{40, 30, std::vector<unsigned char>(1200, 1), {0, 0, 39, 29}};
    CHECK(crop_resize_to(img, m, 25, 50) == resize_bicubic(img, 25, 50));
  }
  SUBCASE("breast in the left half fills the output") {
    GrayImage img(200, 160);
    const GrayImage half = testsupport::smooth_ellipse(200, 160, 0, 80, 99, 70, 0.7, 0.1);
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = half.pixels()[i];
    const BreastMask m = segment_breast(img);
    CHECK(m.bbox.x1 < 100);
    const GrayImage out = crop_resize_to(img, m, 500, 800);
    CHECK(out.width() == 500);
    CHECK(out.height() == 800);
    // The ellipse touches its bounding box on the right edge, so only a
    // few columns of interpolation bleed may be empty there.
    int empty_right = 0;
    for (int x = out.width() - 1; x >= 0; --x) {
      bool any = false;
      for (int y = 0; y < out.height(); ++y) any |= out.at(x, y) > 0.0;
      if (any) break;
      ++empty_right;
    }
    CHECK(empty_right <= 3);
  }
  SUBCASE("background is zeroed") {
    GrayImage img(50, 50, 0.05);
    const GrayImage e = testsupport::smooth_ellipse(50, 50, 25, 25, 15, 15, 0.8, 0.05);
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] += e.pixels()[i];
    const BreastMask m = segment_breast(img);
    const GrayImage out = crop_resize_to(img, m, m.bbox.width(), m.bbox.height());
    CHECK(out.at(0, 0) == 0.0);
  }
}

TEST_CASE("orientation standardization") {
  Rng rng(6);
  const GrayImage img = testsupport::random_image(rng, 17, 11);
  CHECK(standardize_orientation(img, Side::Left) == img);
  CHECK(standardize_orientation(standardize_orientation(img, Side::Right), Side::Right) == img);

  PhantomParams p;
  p.size = 128;
  p.lesion_radius = 8;
  const CaseRecord rec = generate_case(5, p, Label::Control);
  const PhantomView& right = rec.right_cc;
  auto column_mass = [](const GrayImage& g, int x) {
    double s = 0.0;
    for (int y = 0; y < g.height(); ++y) s += g.at(x, y);
    return s;
  };
  CHECK(column_mass(right.image, 127) > 0.0);
  CHECK(column_mass(right.image, 0) == 0.0);
  const GrayImage std_right = standardize_orientation(right.image, Side::Right);
  CHECK(column_mass(std_right, 0) > 0.0);
  CHECK(column_mass(std_right, 127) == 0.0);
}

TEST_CASE("CLAHE") {
  SUBCASE("constant stays constant") {
    const GrayImage out = clahe(GrayImage(64, 64, 0.37));
    for (double v : out.pixels()) CHECK(v == out.pixels()[0]);
  }
  SUBCASE("low-contrast ramp gains contrast") {
    GrayImage ramp(128, 128);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) ramp.at(x, y) = 0.4 + 0.2 * (x + y) / 254.0;
    CHECK(stddev(clahe(ramp)) > stddev(ramp));
  }
  SUBCASE("clip 1 with one tile is global equalization") {
    Rng rng(8);
    const GrayImage img = testsupport::random_image(rng, 40, 30);
    const GrayImage out = clahe(img, {1.0, 1, 1, 256});
    std::vector<double> hist(256, 0.0);
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    auto bin = [&](double v) {
      const double u = (v - *lo) / (*hi - *lo);
      return u > 0.0 ? std::min(255, static_cast<int>(u * 256.0)) : 0;
    };
    for (double v : img.pixels()) hist[bin(v)] += 1.0;
    std::vector<double> cdf(256);
    std::partial_sum(hist.begin(), hist.end(), cdf.begin());
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(out.pixels()[i] == doctest::Approx(cdf[bin(img.pixels()[i])] / 1200.0).epsilon(1e-12));
    }
  }
  SUBCASE("output stays in range and preserves order within one tile") {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
      const GrayImage img = testsupport::random_image(rng, 50 + rng.below(50), 50 + rng.below(50));
      const GrayImage out = clahe(img, {rng.uniform(0.005, 1.0), 1 + rng.below(6), 1 + rng.below(6), 256});
      for (double v : out.pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    const GrayImage img = testsupport::random_image(rng, 30, 30);
    const GrayImage out = clahe(img, {0.02, 1, 1, 256});
    for (std::size_t i = 1; i < img.size(); ++i) {
      if (img.pixels()[i] > img.pixels()[0]) CHECK(out.pixels()[i] >= out.pixels()[0]);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(clahe(GrayImage(10, 10), {0.01, 8, 8, 256}), Error);
    CHECK_THROWS_AS(clahe(GrayImage(64, 64), {0.0, 8, 8, 256}), Error);
    try {
      clahe(GrayImage(10, 10), {0.01, 8, 8, 256});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateSize);
    }
  }
}

TEST_CASE("preprocess_view produces the requested size in left orientation") {
  PhantomParams p;
  p.size = 200;
  p.lesion_radius = 8;
  const CaseRecord rec = generate_case(12, p, Label::Control);
  const GrayImage out = preprocess_view(rec.right_mlo.image, Side::Right, 500, 800);
  CHECK(out.width() == 500);
  CHECK(out.height() == 800);
  double left_col = 0, right_col = 0;
  for (int y = 0; y < 800; ++y) {
    left_col += out.at(2, y);
    right_col += out.at(497, y);
  }
  CHECK(left_col > right_col);
}
