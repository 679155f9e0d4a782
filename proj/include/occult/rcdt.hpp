#pragma once

#include <filesystem>
#include <vector>

#include "occult/image.hpp"
#include "occult/radon.hpp"

namespace occult {

// Regularizer added to every projection sample before normalization,
// relative to the projection maximum.
inline constexpr double kRcdtEpsilon = 1e-8;

// Projections after adding the regularizer and scaling each angle to unit
// mass. `mass[k]` is the regularized mass before scaling and `epsilon[k]` the
// regularizer that was added, so raw = values * mass - epsilon.
struct NormalizedProjections {
  Sinogram density;
  std::vector<double> mass;
  std::vector<double> epsilon;
};

NormalizedProjections normalize_projections(const Sinogram& sino);

// Per-angle monotone map f(t, theta) in detector (pixel) units: the target
// CDF evaluated at f(t) equals the template CDF at t.
struct WarpField {
  Sinogram f;
};

// Signed transform values on the sinogram grid, plus the target's per-angle
// mass so the inverse can restore absolute intensity. When target_mass is
// empty the inverse falls back to the template's mass.
struct RcdtImage {
  Sinogram values;
  std::vector<double> target_mass;
  std::vector<double> target_epsilon;
};

// Piecewise-linear CDF of a unit-mass projection evaluated at the cell edges
// t_i - 1/2 (n + 1 values, first 0).
std::vector<double> edge_cdf(std::span<const double> density);

WarpField compute_warp(const Sinogram& template_sino, const Sinogram& target_sino);

// (f - t) * sqrt(template density) on the normalized projections.
RcdtImage forward_rcdt(const Sinogram& template_sino, const Sinogram& target_sino);
RcdtImage forward_rcdt(const GrayImage& template_img, const GrayImage& target_img, int n_theta);

// Rebuilds the target projections from the template and the transform, then
// back-projects. Throws NonMonotoneWarp if the recovered map decreases.
GrayImage inverse_rcdt(const RcdtImage& rcdt, const Sinogram& template_sino, int out_width,
                       int out_height);

// Target projections implied by the transform (the step before back
// projection in inverse_rcdt).
Sinogram recover_target_projections(const RcdtImage& rcdt, const Sinogram& template_sino);

// Back-projects the transform values directly and min-max normalizes to
// [0, 1]; a flat result maps to all zeros.
GrayImage visualize_rcdt(const RcdtImage& rcdt, int out_width, int out_height);

// Writes the grid as a min-max scaled 16-bit PNG (rows = t, columns = theta)
// plus `<path>.txt` recording the grid and value range.
void dump_sinogram(const Sinogram& sino, const std::filesystem::path& path);

}  // namespace occult
