#include <doctest.h>

#include <cmath>

#include "occult/error.hpp"
#include "occult/eval.hpp"
#include "occult/image.hpp"
#include "occult/image_io.hpp"
#include "occult/phantom.hpp"
#include "occult/preprocess.hpp"
#include "occult/simulate.hpp"
#include "support/support.hpp"

using namespace occult;
using testsupport::Rng;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

}  // namespace

TEST_CASE("mirror without smoothing is an exact flip") {
  Rng rng(1);
  const GrayImage img = testsupport::random_image(rng, 25, 14);
  const SimulatorSpec spec{SimulatorKind::Mirror, 0.0, {}};
  const GrayImage sim = simulate_contralateral(img, spec, "case_0000", "right_cc");
  CHECK(sim == flip(img, FlipAxis::Horizontal));
  CHECK(simulate_contralateral(sim, spec, "case_0000", "left_cc") == img);
}

TEST_CASE("mirror of a symmetric breast is the input up to the blur") {
  const GrayImage img = testsupport::smooth_ellipse(120, 90, 59.5, 44.5, 40, 30, 0.7, 0.5);
  const SimulatorSpec spec;
  const GrayImage sim = simulate_contralateral(img, spec, "c", "right_cc");
  const GrayImage blurred = clamp01(gaussian_blur(img, spec.smoothing_sigma));
  double worst = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(sim.pixels()[i] - blurred.pixels()[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("mirror output is deterministic, in range and input-sized") {
  Rng rng(2);
  const GrayImage img = testsupport::random_image(rng, 40, 30);
  const SimulatorSpec spec{SimulatorKind::Mirror, 3.0, {}};
  const GrayImage a = simulate_contralateral(img, spec, "x", "right_mlo");
  const GrayImage b = simulate_contralateral(img, spec, "x", "right_mlo");
  CHECK(a == b);
  CHECK(a.width() == 40);
  CHECK(a.height() == 30);
  for (double v : a.pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(code_of([&] { simulate_contralateral(img, {SimulatorKind::Mirror, -1.0, {}}, "x", "v"); }) ==
        ErrorCode::InvalidParams);
}

TEST_CASE("simulated views are closer to the real contralateral than the pair is") {
  // Default phantom at the pipeline's working resolution.
  const PhantomParams p;
  double mse_sim = 0.0, mse_real = 0.0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    const CaseRecord rec = generate_cohort_case(7, i, n, p);
    const GrayImage left = preprocess_view(rec.left_cc.image, Side::Left, 500, 800);
    const GrayImage right = preprocess_view(rec.right_cc.image, Side::Right, 500, 800);
    const GrayImage sim_native = simulate_contralateral(left, {}, rec.case_id, "right_cc");
    const GrayImage sim = standardize_orientation(sim_native, Side::Right);
    mse_sim += similarity(sim, right).mse;
    mse_real += similarity(left, right).mse;
  }
  CHECK(mse_sim / n < mse_real / n);
}

TEST_CASE("external simulator") {
  testsupport::TempDir dir("simulate");
  CHECK(external_image_name("case_0003", "right_cc") == "case_0003_right_cc_sim.png");
  Rng rng(3);
  const GrayImage input = testsupport::random_image(rng, 16, 12);
  const GrayImage stored = testsupport::random_image(rng, 16, 12);
  save_image(stored, dir / "case_0003_right_cc_sim.png", 16);
  const SimulatorSpec spec{SimulatorKind::External, 0.0, dir.path()};
  const GrayImage got = simulate_contralateral(input, spec, "case_0003", "right_cc");
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.pixels()[i] - stored.pixels()[i]) <= 1.0 / 65535.0);

  CHECK(code_of([&] { simulate_contralateral(input, spec, "case_0004", "right_cc"); }) ==
        ErrorCode::MissingExternalImage);
  save_image(GrayImage(5, 5, 0.5), dir / "case_0005_left_mlo_sim.png");
  CHECK(code_of([&] { simulate_contralateral(input, spec, "case_0005", "left_mlo"); }) ==
        ErrorCode::DimensionMismatch);
}
