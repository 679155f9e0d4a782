#include "occult/simulate.hpp"

#include "occult/error.hpp"
#include "occult/image_io.hpp"

namespace occult {

std::string external_image_name(const std::string& case_id, const std::string& view) {
  return case_id + "_" + view + "_sim.png";
}

GrayImage simulate_contralateral(const GrayImage& input, const SimulatorSpec& spec,
                                 const std::string& case_id, const std::string& view) {
  if (spec.kind == SimulatorKind::Mirror) {
    if (!(spec.smoothing_sigma >= 0.0)) {
      fail(ErrorCode::InvalidParams, "smoothing_sigma must be non-negative");
    }
    return clamp01(gaussian_blur(flip(input, FlipAxis::Horizontal), spec.smoothing_sigma));
  }
  const auto path = spec.external_dir / external_image_name(case_id, view);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::MissingExternalImage, "missing simulated image " + path.string());
  }
  GrayImage sim = load_image(path);
  if (sim.width() != input.width() || sim.height() != input.height()) {
    fail(ErrorCode::DimensionMismatch, path.string() + " does not match the input size");
  }
  return sim;
}

}  // namespace occult
