#include "occult/rcdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "occult/error.hpp"
#include "occult/image_io.hpp"

namespace occult {

namespace {

void check_nonnegative(const Sinogram& sino, const char* what) {
  for (double v : sino.values()) {
    if (v < 0.0 || !std::isfinite(v)) {
      fail(ErrorCode::NegativeInput, std::string(what) + " projections contain negative values");
    }
  }
}

void check_grids(const Sinogram& a, const Sinogram& b) {
  if (!a.same_grid(b)) {
    fail(ErrorCode::GridMismatch,
         "sinogram grids differ (" + std::to_string(a.n_t()) + "x" + std::to_string(a.n_theta()) +
             " vs " + std::to_string(b.n_t()) + "x" + std::to_string(b.n_theta()) + ")");
  }
}

// Inverse of the piecewise-linear CDF through `edges` (cell i spans
// [t_origin + i - 1/2, t_origin + i + 1/2]). Flat cells resolve to their left
// edge.
double inverse_cdf(const std::vector<double>& edges, std::span<const double> density,
                   double t_origin, double level, std::size_t& cursor) {
  const std::size_t n = density.size();
  while (cursor + 1 < n && edges[cursor + 1] < level) ++cursor;
  const double left = t_origin + static_cast<double>(cursor) - 0.5;
  const double d = density[cursor];
  if (!(d > 0.0)) return left;
  return left + std::clamp((level - edges[cursor]) / d, 0.0, 1.0);
}

}  // namespace

NormalizedProjections normalize_projections(const Sinogram& sino) {
  check_nonnegative(sino, "input");
  NormalizedProjections out{sino, std::vector<double>(static_cast<std::size_t>(sino.n_theta())),
                            std::vector<double>(static_cast<std::size_t>(sino.n_theta()))};
  for (int k = 0; k < sino.n_theta(); ++k) {
    auto col = out.density.projection(k);
    const double peak = *std::max_element(col.begin(), col.end());
    // An empty projection becomes uniform.
    const double eps = peak > 0.0 ? kRcdtEpsilon * peak : 1.0;
    double mass = 0.0;
    for (double& v : col) {
      v += eps;
      mass += v;
    }
    for (double& v : col) v /= mass;
    out.mass[static_cast<std::size_t>(k)] = mass;
    out.epsilon[static_cast<std::size_t>(k)] = eps;
  }
  return out;
}

std::vector<double> edge_cdf(std::span<const double> density) {
  std::vector<double> edges(density.size() + 1, 0.0);
  for (std::size_t i = 0; i < density.size(); ++i) edges[i + 1] = edges[i] + density[i];
  return edges;
}

namespace {

WarpField warp_between(const NormalizedProjections& tmpl, const NormalizedProjections& targ) {
  const Sinogram& grid = tmpl.density;
  WarpField warp{Sinogram(grid.n_t(), grid.theta())};
  for (int k = 0; k < grid.n_theta(); ++k) {
    const auto p0 = tmpl.density.projection(k);
    const auto p1 = targ.density.projection(k);
    const auto e0 = edge_cdf(p0);
    const auto e1 = edge_cdf(p1);
    auto f = warp.f.projection(k);
    if (std::equal(p0.begin(), p0.end(), p1.begin())) {
      for (int i = 0; i < grid.n_t(); ++i) f[static_cast<std::size_t>(i)] = grid.t(i);
      continue;
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      const double level = e0[i] + 0.5 * p0[i];
      f[i] = inverse_cdf(e1, p1, grid.t_origin(), level, cursor);
    }
  }
  return warp;
}

}  // namespace

WarpField compute_warp(const Sinogram& template_sino, const Sinogram& target_sino) {
  check_grids(template_sino, target_sino);
  return warp_between(normalize_projections(template_sino), normalize_projections(target_sino));
}

RcdtImage forward_rcdt(const Sinogram& template_sino, const Sinogram& target_sino) {
  check_grids(template_sino, target_sino);
  const NormalizedProjections tmpl = normalize_projections(template_sino);
  const NormalizedProjections targ = normalize_projections(target_sino);
  const WarpField warp = warp_between(tmpl, targ);
  RcdtImage out{Sinogram(template_sino.n_t(), template_sino.theta()), targ.mass, targ.epsilon};
  for (int k = 0; k < template_sino.n_theta(); ++k) {
    const auto p0 = tmpl.density.projection(k);
    const auto f = warp.f.projection(k);
    auto v = out.values.projection(k);
    for (int i = 0; i < template_sino.n_t(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      v[ii] = (f[ii] - template_sino.t(i)) * std::sqrt(p0[ii]);
    }
  }
  return out;
}

RcdtImage forward_rcdt(const GrayImage& template_img, const GrayImage& target_img, int n_theta) {
  if (template_img.width() != target_img.width() || template_img.height() != target_img.height()) {
    fail(ErrorCode::GridMismatch, "forward_rcdt: template and target sizes differ");
  }
  return forward_rcdt(radon(template_img, n_theta), radon(target_img, n_theta));
}

Sinogram recover_target_projections(const RcdtImage& rcdt, const Sinogram& template_sino) {
  check_grids(rcdt.values, template_sino);
  const NormalizedProjections tmpl = normalize_projections(template_sino);
  const int n_t = template_sino.n_t();
  const int n_theta = template_sino.n_theta();
  const bool own_mass = rcdt.target_mass.size() == static_cast<std::size_t>(n_theta) &&
                        rcdt.target_epsilon.size() == static_cast<std::size_t>(n_theta);
  const double origin = template_sino.t_origin();

  Sinogram out(n_t, template_sino.theta());
  std::vector<double> f(static_cast<std::size_t>(n_t));
  std::vector<double> g(static_cast<std::size_t>(n_t));
  for (int k = 0; k < n_theta; ++k) {
    const auto p0 = tmpl.density.projection(k);
    const auto v = rcdt.values.projection(k);
    for (int i = 0; i < n_t; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      f[ii] = template_sino.t(i) + v[ii] / std::sqrt(p0[ii]);
      if (i > 0 && f[ii] < f[ii - 1] - 1e-6) {
        fail(ErrorCode::NonMonotoneWarp, "inverse_rcdt: recovered warp decreases at angle " +
                                             std::to_string(k) + ", sample " + std::to_string(i));
      }
      if (i > 0) f[ii] = std::max(f[ii], f[ii - 1]);
    }

    // g = f^-1 sampled on the detector grid; slope-one extrapolation outside.
    std::size_t seg = 0;
    for (int j = 0; j < n_t; ++j) {
      const double u = template_sino.t(j);
      double gj;
      if (u <= f.front()) {
        gj = template_sino.t(0) + (u - f.front());
      } else if (u >= f.back()) {
        gj = template_sino.t(n_t - 1) + (u - f.back());
      } else {
        while (seg + 2 < f.size() && f[seg + 1] < u) ++seg;
        const double span = f[seg + 1] - f[seg];
        const double a = span > 0.0 ? (u - f[seg]) / span : 0.0;
        gj = template_sino.t(static_cast<int>(seg)) + a;
      }
      g[static_cast<std::size_t>(j)] = gj;
    }

    auto dst = out.projection(k);
    for (int j = 0; j < n_t; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      double slope;
      if (n_t == 1) {
        slope = 1.0;
      } else if (j == 0) {
        slope = g[1] - g[0];
      } else if (j == n_t - 1) {
        slope = g[jj] - g[jj - 1];
      } else {
        slope = 0.5 * (g[jj + 1] - g[jj - 1]);
      }
      // Template density at g(u), linear between samples, zero off the grid.
      const double pos = g[jj] - origin;
      double dens = 0.0;
      if (pos >= 0.0 && pos <= n_t - 1) {
        const int i0 = std::min(static_cast<int>(pos), std::max(0, n_t - 2));
        const double a = pos - i0;
        dens = n_t == 1 ? p0[0]
                        : (1.0 - a) * p0[static_cast<std::size_t>(i0)] +
                              a * p0[static_cast<std::size_t>(i0 + 1)];
      }
      const auto kk = static_cast<std::size_t>(k);
      const double mass = own_mass ? rcdt.target_mass[kk] : tmpl.mass[kk];
      const double eps = own_mass ? rcdt.target_epsilon[kk] : tmpl.epsilon[kk];
      dst[jj] = std::max(0.0, dens * slope * mass - eps);
    }
  }
  return out;
}

GrayImage inverse_rcdt(const RcdtImage& rcdt, const Sinogram& template_sino, int out_width,
                       int out_height) {
  return iradon(recover_target_projections(rcdt, template_sino), out_width, out_height);
}

GrayImage visualize_rcdt(const RcdtImage& rcdt, int out_width, int out_height) {
  GrayImage img = iradon(rcdt.values, out_width, out_height);
  const auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double min = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(px.begin(), px.end(), 0.0);
    return img;
  }
  for (double& v : px) v = (v - min) / range;
  return img;
}

void dump_sinogram(const Sinogram& sino, const std::filesystem::path& path) {
  const auto vals = sino.values();
  double lo = 0.0, hi = 0.0;
  if (!vals.empty()) {
    const auto [a, b] = std::minmax_element(vals.begin(), vals.end());
    lo = *a;
    hi = *b;
  }
  const double range = hi > lo ? hi - lo : 1.0;
  GrayImage img(sino.n_theta(), sino.n_t());
  for (int k = 0; k < sino.n_theta(); ++k) {
    for (int i = 0; i < sino.n_t(); ++i) img.at(k, i) = (sino.at(i, k) - lo) / range;
  }
  save_image(img, path, 16);

  std::ofstream meta(path.string() + ".txt");
  if (!meta) fail(ErrorCode::IoFailure, "cannot write " + path.string() + ".txt");
  meta << std::setprecision(17);
  meta << "n_t " << sino.n_t() << '\n'
       << "n_theta " << sino.n_theta() << '\n'
       << "t_origin " << sino.t_origin() << '\n'
       << "t_step 1\n"
       << "value_min " << lo << '\n'
       << "value_max " << hi << '\n'
       << "theta";
  for (double th : sino.theta()) meta << ' ' << th;
  meta << '\n';
  if (!meta) fail(ErrorCode::IoFailure, "short write to " + path.string() + ".txt");
}

}  // namespace occult
