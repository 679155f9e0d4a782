#pragma once

// Seeded generators and reference implementations shared by the unit and
// acceptance tests. Nothing here calls into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <numbers>
#include <span>
#include <vector>

#include "occult/image.hpp"

namespace testsupport {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }

 private:
  std::uint64_t state_;
};

// Ellipse with a cos^2 rim of width `rim` pixels, peak `amp`.
inline occult::GrayImage smooth_ellipse(int w, int h, double cx, double cy, double ax, double ay,
                                        double amp = 0.8, double rim = 0.25) {
  occult::GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = std::hypot((x - cx) / ax, (y - cy) / ay);
      double v = 0.0;
      if (r < 1.0 - rim) {
        v = 1.0;
      } else if (r < 1.0) {
        const double c = std::cos(0.5 * std::numbers::pi * (r - (1.0 - rim)) / rim);
        v = c * c;
      }
      img.at(x, y) = amp * v;
    }
  }
  return img;
}

// Smooth phantom: a large ellipse with two smaller smooth inclusions.
inline occult::GrayImage smooth_phantom(int n) {
  occult::GrayImage base = smooth_ellipse(n, n, 0.5 * (n - 1), 0.5 * (n - 1), 0.38 * n, 0.3 * n, 0.5, 0.3);
  const occult::GrayImage a = smooth_ellipse(n, n, 0.4 * n, 0.45 * n, 0.1 * n, 0.08 * n, 0.3, 0.6);
  const occult::GrayImage b = smooth_ellipse(n, n, 0.62 * n, 0.58 * n, 0.07 * n, 0.12 * n, 0.2, 0.6);
  for (std::size_t i = 0; i < base.size(); ++i) base.pixels()[i] += a.pixels()[i] + b.pixels()[i];
  return base;
}

inline occult::GrayImage gaussian_blob(int w, int h, double cx, double cy, double sigma, double amp = 1.0) {
  occult::GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      img.at(x, y) = amp * std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  return img;
}

inline double relative_l2(std::span<const double> got, std::span<const double> want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num / den);
}

// Piecewise-linear CDF of unit-mass `density` on cells [i - 1/2, i + 1/2]
// (index units), evaluated at arbitrary u by direct summation.
inline double cdf_at(const std::vector<double>& density, double u) {
  double c = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    const double lo = static_cast<double>(i) - 0.5;
    if (u >= lo + 1.0) {
      c += density[i];
    } else if (u > lo) {
      c += density[i] * (u - lo);
      break;
    } else {
      break;
    }
  }
  return c;
}

// Adds the relative regularizer and scales to unit mass, mirroring the
// documented convention.
inline std::vector<double> regularized_density(std::span<const double> raw, double rel_eps = 1e-8) {
  std::vector<double> d(raw.begin(), raw.end());
  const double peak = *std::max_element(d.begin(), d.end());
  const double eps = peak > 0.0 ? rel_eps * peak : 1.0;
  double mass = 0.0;
  for (double& v : d) {
    v += eps;
    mass += v;
  }
  for (double& v : d) v /= mass;
  return d;
}

// Brute-force CDF matching: for each template cell centre, bisects the target
// CDF (evaluated by direct summation) for the displacement in index units.
inline std::vector<double> brute_force_warp(const std::vector<double>& templ,
                                            const std::vector<double>& target) {
  const std::size_t n = templ.size();
  std::vector<double> f(n);
  double below = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double level = below + 0.5 * templ[i];
    below += templ[i];
    double lo = -0.5, hi = static_cast<double>(n) - 0.5;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf_at(target, mid) < level ? lo : hi) = mid;
    }
    f[i] = 0.5 * (lo + hi);
  }
  return f;
}

// AUC by explicit pairing, ties counting one half.
inline double pair_win(double pos, double neg) { return pos > neg ? 1.0 : pos == neg ? 0.5 : 0.0; }

inline double exhaustive_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      wins += pair_win(s[i], s[j]);
      pairs += 1.0;
    }
  }
  return wins / pairs;
}

struct Cohort {
  std::vector<double> a, b;
  std::vector<int> y;
};

// Paired binormal scores with correlated noise between the two readers.
inline Cohort paired_cohort(Rng& rng, int npos, int nneg, double mu_a, double mu_b, double rho) {
  Cohort c;
  for (int i = 0; i < npos + nneg; ++i) {
    const bool pos = i < npos;
    const double shared = rng.normal();
    const double ea = shared;
    const double eb = rho * shared + std::sqrt(1 - rho * rho) * rng.normal();
    c.a.push_back(1.0 / (1.0 + std::exp(-((pos ? mu_a : 0.0) + ea))));
    c.b.push_back(1.0 / (1.0 + std::exp(-((pos ? mu_b : 0.0) + eb))));
    c.y.push_back(pos ? 1 : 0);
  }
  return c;
}

// Two-sided p for the AUC difference, using the standard deviation of a
// stratified paired bootstrap.
inline double bootstrap_p(const Cohort& c, Rng& rng, int resamples) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < c.y.size(); ++i) (c.y[i] ? pos : neg).push_back(i);
  const double observed = exhaustive_auc(c.a, c.y) - exhaustive_auc(c.b, c.y);
  double sum = 0.0, sq = 0.0;
  Cohort r;
  for (int k = 0; k < resamples; ++k) {
    r.a.clear();
    r.b.clear();
    r.y.clear();
    for (const auto* group : {&pos, &neg}) {
      for (std::size_t n = 0; n < group->size(); ++n) {
        const std::size_t i = (*group)[static_cast<std::size_t>(rng.below(static_cast<int>(group->size())))];
        r.a.push_back(c.a[i]);
        r.b.push_back(c.b[i]);
        r.y.push_back(c.y[i]);
      }
    }
    const double d = exhaustive_auc(r.a, r.y) - exhaustive_auc(r.b, r.y);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / resamples;
  const double sd = std::sqrt(sq / resamples - mean * mean);
  return std::erfc(std::abs(observed / sd) / std::sqrt(2.0));
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("occult_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Copy of the pixels, safe to iterate over a temporary image.
inline std::vector<double> pixels(const occult::GrayImage& img) { return img.values(); }

inline occult::GrayImage random_image(Rng& rng, int w, int h) {
  occult::GrayImage img(w, h);
  for (double& v : img.pixels()) v = rng.uniform();
  return img;
}

}  // namespace testsupport
