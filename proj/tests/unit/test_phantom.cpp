#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <string_view>

#include "occult/error.hpp"
#include "occult/image_io.hpp"
#include "occult/phantom.hpp"
#include "support/support.hpp"

using namespace occult;

namespace {

PhantomParams small() {
  PhantomParams p;
  p.size = 128;
  p.lesion_radius = 10;
  p.lesion_jitter = 4;
  return p;
}

const std::array<std::pair<Side, View>, 4> kAllViews = {
    {{Side::Left, View::Cc}, {Side::Right, View::Cc}, {Side::Left, View::Mlo}, {Side::Right, View::Mlo}}};

std::size_t image_hash(const GrayImage& img) {
  const auto px = img.pixels();
  return std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(px.data()), px.size() * sizeof(double)));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const CaseRecord a = generate_case(42, small(), Label::Cancer);
  const CaseRecord b = generate_case(42, small(), Label::Cancer);
  CHECK(a.cancer_side == b.cancer_side);
  for (auto [s, v] : kAllViews) {
    CHECK(a.view(s, v).image == b.view(s, v).image);
    CHECK(a.view(s, v).lesion_mask == b.view(s, v).lesion_mask);
  }
  const CaseRecord c = generate_case(43, small(), Label::Cancer);
  CHECK_FALSE(a.left_cc.image == c.left_cc.image);
}

TEST_CASE("a zero-contrast cancer is the control from the same seed") {
  PhantomParams p = small();
  p.lesion_contrast = 0.0;
  const CaseRecord cancer = generate_case(9, p, Label::Cancer);
  const CaseRecord control = generate_case(9, p, Label::Control);
  for (auto [s, v] : kAllViews) CHECK(cancer.view(s, v).image == control.view(s, v).image);
}

TEST_CASE("lesion contrast follows the Gaussian profile") {
  PhantomParams p;
  p.size = 256;
  p.lesion_radius = 16;
  p.lesion_contrast = 0.08;
  PhantomParams flat = p;
  flat.lesion_contrast = 0.0;
  // Profile exp(-d^2 / (2 sigma^2)) with sigma = R / 2, averaged over the
  // disk d <= R and over the annulus R < d <= 2R.
  const double disk_mean = 0.5 * (1.0 - std::exp(-2.0));
  const double annulus_mean = (std::exp(-2.0) - std::exp(-8.0)) / 6.0;
  const double want = p.lesion_contrast * (disk_mean - annulus_mean);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const CaseRecord rec = generate_case(seed, p, Label::Cancer);
    const CaseRecord base = generate_case(seed, flat, Label::Cancer);
    for (View v : {View::Cc, View::Mlo}) {
      const PhantomView& pv = rec.view(*rec.cancer_side, v);
      const PhantomView& pb = base.view(*rec.cancer_side, v);
      double roi = 0, ann = 0;
      int n_roi = 0, n_ann = 0;
      for (int y = 0; y < p.size; ++y) {
        for (int x = 0; x < p.size; ++x) {
          const double d = std::hypot(x - pv.lesion_x, y - pv.lesion_y);
          const double diff = pv.image.at(x, y) - pb.image.at(x, y);
          if (d <= p.lesion_radius) {
            roi += diff;
            ++n_roi;
          } else if (d <= 2 * p.lesion_radius) {
            ann += diff;
            ++n_ann;
          }
        }
      }
      const double got = roi / n_roi - ann / n_ann;
      CHECK(std::abs(got - want) / want < 0.10);
    }
  }
}

TEST_CASE("lesions sit inside the breast on the cancer side only") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const CaseRecord rec = generate_case(seed, small(), Label::Cancer);
    REQUIRE(rec.has_lesion());
    for (auto [s, v] : kAllViews) {
      const PhantomView& pv = rec.view(s, v);
      if (s == *rec.cancer_side) {
        REQUIRE(pv.lesion_mask.size() == pv.breast_mask.size());
        std::size_t count = 0;
        for (std::size_t i = 0; i < pv.lesion_mask.size(); ++i) {
          if (!pv.lesion_mask[i]) continue;
          ++count;
          CHECK(pv.breast_mask[i]);
        }
        CHECK(count > 0);
        const auto cx = static_cast<int>(std::lround(pv.lesion_x));
        const auto cy = static_cast<int>(std::lround(pv.lesion_y));
        CHECK(pv.lesion_mask[static_cast<std::size_t>(cy) * 128 + static_cast<std::size_t>(cx)]);
      } else {
        CHECK(pv.lesion_mask.empty());
      }
    }
  }
}

TEST_CASE("chest wall follows the side") {
  const CaseRecord rec = generate_case(3, small(), Label::Control);
  auto col = [](const GrayImage& g, int x) {
    double s = 0.0;
    for (int y = 0; y < g.height(); ++y) s += g.at(x, y);
    return s;
  };
  CHECK(col(rec.left_cc.image, 0) > 0.0);
  CHECK(col(rec.left_cc.image, 127) == 0.0);
  CHECK(col(rec.right_mlo.image, 127) > 0.0);
  CHECK(col(rec.right_mlo.image, 0) == 0.0);
}

TEST_CASE("cohorts") {
  const PhantomParams p = small();
  const auto cohort = generate_cohort(1, 10, 5, p);
  REQUIRE(cohort.size() == 15);
  std::set<std::string> ids;
  int lesions = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const CaseRecord& c = cohort[i];
    ids.insert(c.case_id);
    CHECK(c.case_id == cohort_case_id(static_cast<int>(i)));
    CHECK((c.label == Label::Cancer) == (i >= 10));
    CHECK(c.has_lesion() == (c.label == Label::Cancer));
    bool any_mask = false;
    for (auto [s, v] : kAllViews) {
      any_mask |= !c.view(s, v).lesion_mask.empty();
      for (double px : c.view(s, v).image.pixels()) {
        CHECK(px >= 0.0);
        CHECK(px <= 1.0);
      }
    }
    lesions += any_mask;
  }
  CHECK(ids.size() == 15);
  CHECK(lesions == 5);
  CHECK(generate_cohort(1, 0, 0, p).empty());

  SUBCASE("cases generated alone match the cohort") {
    for (int i : {0, 7, 14}) {
      const CaseRecord c = generate_cohort_case(1, i, 10, p);
      CHECK(c.case_id == cohort[static_cast<std::size_t>(i)].case_id);
      CHECK(c.right_mlo.image == cohort[static_cast<std::size_t>(i)].right_mlo.image);
    }
  }
  SUBCASE("different seeds share no image") {
    std::set<std::size_t> first;
    for (const auto& c : cohort)
      for (auto [s, v] : kAllViews) first.insert(image_hash(c.view(s, v).image));
    CHECK(first.size() == 60);
    for (const auto& c : generate_cohort(2, 10, 5, p))
      for (auto [s, v] : kAllViews) CHECK(first.count(image_hash(c.view(s, v).image)) == 0);
  }
}

TEST_CASE("parameter validation") {
  auto bad = [](auto edit) {
    PhantomParams p = small();
    edit(p);
    return code_of([&] { generate_case(1, p, Label::Control); });
  };
  CHECK(bad([](PhantomParams& p) { p.size = 10; }) == ErrorCode::InvalidParams);
  CHECK(bad([](PhantomParams& p) { p.texture_correlation = 1.5; }) == ErrorCode::InvalidParams);
  CHECK(bad([](PhantomParams& p) { p.lesion_contrast = -0.1; }) == ErrorCode::InvalidParams);
  CHECK(bad([](PhantomParams& p) { p.lesion_radius = 0.0; }) == ErrorCode::InvalidParams);
  CHECK(bad([](PhantomParams& p) { p.noise_sigma = std::nan(""); }) == ErrorCode::InvalidParams);
  CHECK(code_of([] { generate_cohort(1, -1, 2, small()); }) == ErrorCode::InvalidParams);
}

TEST_CASE("cohort files and manifest") {
  testsupport::TempDir dir("phantom");
  const auto cohort = generate_cohort(5, 2, 2, small());
  write_cohort(cohort, dir.path());
  const auto rows = read_manifest(dir / "manifest.csv");
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rows[i].case_id == cohort[i].case_id);
    CHECK(rows[i].label == cohort[i].label);
    CHECK(rows[i].cancer_side == cohort[i].cancer_side);
    for (auto [s, v] : kAllViews) {
      const GrayImage img = load_image(dir / view_file_name(cohort[i].case_id, s, v));
      const GrayImage& want = cohort[i].view(s, v).image;
      double worst = 0.0;
      for (std::size_t k = 0; k < img.size(); ++k) worst = std::max(worst, std::abs(img.pixels()[k] - want.pixels()[k]));
      CHECK(worst <= 1.0 / 65535.0);
    }
  }
  CHECK(view_file_name("case_0001", Side::Right, View::Mlo) == "case_0001_right_mlo.png");

  std::ofstream(dir / "bad.csv") << "case_id,label,cancer_side\ncase_0000,maybe,left\n";
  CHECK(code_of([&] { read_manifest(dir / "bad.csv"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([&] { read_manifest(dir / "missing.csv"); }) == ErrorCode::UnreadableFile);
}
