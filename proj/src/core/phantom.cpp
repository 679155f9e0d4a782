#include "occult/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "occult/error.hpp"
#include "occult/image_io.hpp"

namespace occult {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Portable draws on top of mt19937_64 (the standard distributions are not
// specified bit-for-bit across library implementations).
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum StreamId : std::uint64_t {
  kShape = 1,
  kSharedTexture = 10,
  kLeftTexture = 20,
  kRightTexture = 30,
  kNoise = 40,
  kLesion = 50,
};

std::uint64_t view_offset(View v) { return v == View::Cc ? 0 : 5; }

// Value noise: lattice of uniform values with `cells` cells across, smoothstep
// interpolated. Result in [0, 1].
std::vector<double> value_noise(Stream& rng, int size, int cells) {
  const int n = cells + 1;
  std::vector<double> lattice(static_cast<std::size_t>(n) * n);
  for (double& v : lattice) v = rng.uniform();
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  const double scale = static_cast<double>(cells) / size;
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (int y = 0; y < size; ++y) {
    const double gy = (y + 0.5) * scale;
    const int iy = std::min(static_cast<int>(gy), cells - 1);
    const double fy = smooth(gy - iy);
    for (int x = 0; x < size; ++x) {
      const double gx = (x + 0.5) * scale;
      const int ix = std::min(static_cast<int>(gx), cells - 1);
      const double fx = smooth(gx - ix);
      auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * n + i]; };
      const double top = (1.0 - fx) * at(ix, iy) + fx * at(ix + 1, iy);
      const double bot = (1.0 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1);
      out[static_cast<std::size_t>(y) * size + x] = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

// Three octaves, weights 1, 1/2, 1/4, normalized back to [0, 1].
std::vector<double> texture(Stream& rng, int size) {
  auto a = value_noise(rng, size, 4);
  const auto b = value_noise(rng, size, 8);
  const auto c = value_noise(rng, size, 16);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] + 0.5 * b[i] + 0.25 * c[i]) / 1.75;
  return a;
}

struct Shape {
  double cy = 0.0;
  double ax = 0.0;  // semi-axis along x from the chest wall
  double by = 0.0;  // semi-axis along y
};

Shape draw_shape(Stream& rng, int size, View v) {
  Shape s;
  const double mlo = v == View::Mlo ? 1.0 : 0.0;
  s.cy = size * (0.5 + 0.03 * mlo + rng.uniform(-0.02, 0.02));
  s.ax = size * (0.68 + 0.04 * mlo + rng.uniform(-0.04, 0.04));
  s.by = size * (0.40 + 0.03 * mlo + rng.uniform(-0.03, 0.03));
  return s;
}

// Standardized frame: chest wall at x = 0.
PhantomView render_view(const PhantomParams& p, const Shape& shape,
                        const std::vector<double>& shared, const std::vector<double>& own,
                        Stream& noise, bool with_lesion, double lx, double ly) {
  const int n = p.size;
  PhantomView view;
  view.image = GrayImage(n, n);
  view.breast_mask.assign(static_cast<std::size_t>(n) * n, 0);
  const double rho = p.texture_correlation;
  const double sigma = 0.5 * p.lesion_radius;
  if (with_lesion) {
    view.lesion_mask.assign(static_cast<std::size_t>(n) * n, 0);
    view.lesion_x = lx;
    view.lesion_y = ly;
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto i = static_cast<std::size_t>(y) * n + x;
      const double ex = (x + 0.5) / shape.ax;
      const double ey = (y + 0.5 - shape.cy) / shape.by;
      const double r2 = ex * ex + ey * ey;
      double v = 0.0;
      if (r2 <= 1.0) {
        view.breast_mask[i] = 1;
        const double dense = rho * shared[i] + (1.0 - rho) * own[i];
        const double thickness = 0.6 + 0.4 * std::sqrt(1.0 - r2);
        v = (0.2 + 0.4 * dense) * thickness + p.noise_sigma * noise.normal();
        if (with_lesion) {
          const double dx = x - lx;
          const double dy = y - ly;
          const double d2 = dx * dx + dy * dy;
          v += p.lesion_contrast * std::exp(-0.5 * d2 / (sigma * sigma));
          if (d2 <= p.lesion_radius * p.lesion_radius) view.lesion_mask[i] = 1;
        }
        v = std::clamp(v, 0.0, 1.0);
      }
      view.image.pixels()[i] = v;
    }
  }
  return view;
}

// Picks a lesion centre inside the breast where the density texture exceeds
// its 60th percentile, then jitters it.
void place_lesion(Stream& rng, const PhantomParams& p, const Shape& shape,
                  const std::vector<double>& dense, double& lx, double& ly) {
  const int n = p.size;
  const double margin = p.lesion_radius + p.lesion_jitter + 2.0;
  std::vector<double> inside;
  auto eligible = [&](int x, int y) {
    if (x < margin || y < margin || x >= n - margin || y >= n - margin) return false;
    const double ex = (x + 0.5) / shape.ax;
    const double ey = (y + 0.5 - shape.cy) / shape.by;
    return ex * ex + ey * ey <= 0.6;
  };
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (eligible(x, y)) inside.push_back(dense[static_cast<std::size_t>(y) * n + x]);
    }
  }
  double threshold = 0.0;
  if (!inside.empty()) {
    const auto k = static_cast<std::ptrdiff_t>(0.6 * static_cast<double>(inside.size() - 1));
    std::nth_element(inside.begin(), inside.begin() + k, inside.end());
    threshold = inside[static_cast<std::size_t>(k)];
  }
  int bx = static_cast<int>(0.3 * shape.ax);
  int by = static_cast<int>(shape.cy);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int x = static_cast<int>(rng.uniform() * n);
    const int y = static_cast<int>(rng.uniform() * n);
    if (eligible(x, y) && dense[static_cast<std::size_t>(y) * n + x] >= threshold) {
      bx = x;
      by = y;
      break;
    }
  }
  lx = bx + rng.uniform(-p.lesion_jitter, p.lesion_jitter);
  ly = by + rng.uniform(-p.lesion_jitter, p.lesion_jitter);
}

PhantomView to_native(PhantomView v, Side side) {
  if (side == Side::Left) return v;
  const int n = v.image.width();
  v.image = flip(v.image, FlipAxis::Horizontal);
  auto flip_mask = [n](std::vector<unsigned char>& m) {
    if (m.empty()) return;
    for (int y = 0; y < n; ++y) {
      std::reverse(m.begin() + static_cast<std::ptrdiff_t>(y) * n,
                   m.begin() + static_cast<std::ptrdiff_t>(y + 1) * n);
    }
  };
  flip_mask(v.breast_mask);
  flip_mask(v.lesion_mask);
  v.lesion_x = n - 1 - v.lesion_x;
  return v;
}

}  // namespace

void validate(const PhantomParams& p) {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidParams, "phantom: " + what); };
  if (p.size < 64 || p.size > 8192) bad("size must lie in [64, 8192]");
  if (!(p.texture_correlation >= 0.0 && p.texture_correlation <= 1.0)) {
    bad("texture_correlation must lie in [0, 1]");
  }
  if (!(p.lesion_contrast >= 0.0 && p.lesion_contrast <= 1.0)) bad("lesion_contrast must lie in [0, 1]");
  if (!(p.lesion_radius >= 1.0 && p.lesion_radius <= p.size / 8.0)) {
    bad("lesion_radius must lie in [1, size / 8]");
  }
  if (!(p.lesion_jitter >= 0.0 && p.lesion_jitter <= p.size / 8.0)) {
    bad("lesion_jitter must lie in [0, size / 8]");
  }
  if (!(p.noise_sigma >= 0.0 && p.noise_sigma <= 1.0)) bad("noise_sigma must lie in [0, 1]");
}

const char* label_name(Label label) noexcept { return label == Label::Cancer ? "cancer" : "control"; }
const char* view_name(View view) noexcept { return view == View::Cc ? "cc" : "mlo"; }

const PhantomView& CaseRecord::view(Side side, View v) const {
  if (side == Side::Left) return v == View::Cc ? left_cc : left_mlo;
  return v == View::Cc ? right_cc : right_mlo;
}

CaseRecord generate_case(std::uint64_t seed, const PhantomParams& params, Label label,
                         const std::string& case_id) {
  validate(params);
  CaseRecord rec;
  rec.case_id = case_id;
  rec.label = label;

  Stream lesion_rng(seed, kLesion);
  const Side cancer_side = lesion_rng.uniform() < 0.5 ? Side::Left : Side::Right;
  if (label == Label::Cancer) rec.cancer_side = cancer_side;

  for (View v : {View::Cc, View::Mlo}) {
    const std::uint64_t off = view_offset(v);
    Stream shape_rng(seed, kShape + off);
    Stream shared_rng(seed, kSharedTexture + off);
    Stream left_rng(seed, kLeftTexture + off);
    Stream right_rng(seed, kRightTexture + off);
    Stream noise_rng(seed, kNoise + off);
    const Shape base = draw_shape(shape_rng, params.size, v);
    // Small per-side shape differences on top of the shared outline.
    auto side_shape = [&](Stream& rng) {
      Shape s = base;
      s.ax *= 1.0 + rng.uniform(-0.015, 0.015);
      s.by *= 1.0 + rng.uniform(-0.015, 0.015);
      return s;
    };
    const Shape left_shape = side_shape(shape_rng);
    const Shape right_shape = side_shape(shape_rng);
    const auto shared = texture(shared_rng, params.size);
    const auto left_tex = texture(left_rng, params.size);
    const auto right_tex = texture(right_rng, params.size);

    // The lesion draw happens for every case so a zero-contrast cancer matches
    // the control drawn from the same seed.
    const Shape& lesion_shape = cancer_side == Side::Left ? left_shape : right_shape;
    const auto& lesion_own = cancer_side == Side::Left ? left_tex : right_tex;
    std::vector<double> dense(shared.size());
    const double rho = params.texture_correlation;
    for (std::size_t i = 0; i < dense.size(); ++i) dense[i] = rho * shared[i] + (1.0 - rho) * lesion_own[i];
    double lx = 0.0, ly = 0.0;
    place_lesion(lesion_rng, params, lesion_shape, dense, lx, ly);

    const bool left_lesion = rec.cancer_side == Side::Left;
    const bool right_lesion = rec.cancer_side == Side::Right;
    PhantomView left = render_view(params, left_shape, shared, left_tex, noise_rng, left_lesion, lx, ly);
    PhantomView right =
        render_view(params, right_shape, shared, right_tex, noise_rng, right_lesion, lx, ly);
    if (v == View::Cc) {
      rec.left_cc = std::move(left);
      rec.right_cc = to_native(std::move(right), Side::Right);
    } else {
      rec.left_mlo = std::move(left);
      rec.right_mlo = to_native(std::move(right), Side::Right);
    }
  }
  return rec;
}

std::string cohort_case_id(int index) {
  std::ostringstream os;
  os << "case_" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

std::vector<CaseRecord> generate_cohort(std::uint64_t seed, int n_controls, int n_cancers,
                                        const PhantomParams& params) {
  if (n_controls < 0 || n_cancers < 0) fail(ErrorCode::InvalidParams, "case counts must be >= 0");
  validate(params);
  std::vector<CaseRecord> cohort;
  cohort.reserve(static_cast<std::size_t>(n_controls + n_cancers));
  for (int i = 0; i < n_controls + n_cancers; ++i) {
    cohort.push_back(generate_cohort_case(seed, i, n_controls, params));
  }
  return cohort;
}

CaseRecord generate_cohort_case(std::uint64_t seed, int index, int n_controls,
                                const PhantomParams& params) {
  if (index < 0) fail(ErrorCode::InvalidParams, "case index must be >= 0");
  const std::uint64_t case_seed =
      splitmix64(seed + 0x632BE59BD9B4E019ULL * static_cast<std::uint64_t>(index + 1));
  return generate_case(case_seed, params, index < n_controls ? Label::Control : Label::Cancer,
                       cohort_case_id(index));
}

std::string view_file_name(const std::string& case_id, Side side, View view) {
  return case_id + "_" + side_name(side) + "_" + view_name(view) + ".png";
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "case_id,label,cancer_side\n";
  for (const auto& r : rows) {
    out << r.case_id << ',' << label_name(r.label) << ','
        << (r.cancer_side ? side_name(*r.cancer_side) : "none") << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("case_id,label,cancer_side", 0) != 0) {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": expected header case_id,label,cancer_side");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, label, side;
    if (!std::getline(ls, id, ',') || !std::getline(ls, label, ',') || !std::getline(ls, side)) {
      fail(ErrorCode::UnsupportedFormat, path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    ManifestRow r;
    r.case_id = id;
    if (label == "cancer") {
      r.label = Label::Cancer;
    } else if (label == "control") {
      r.label = Label::Control;
    } else {
      fail(ErrorCode::UnsupportedFormat, path.string() + ":" + std::to_string(lineno) + ": unknown label " + label);
    }
    if (side == "left") {
      r.cancer_side = Side::Left;
    } else if (side == "right") {
      r.cancer_side = Side::Right;
    } else if (side != "none") {
      fail(ErrorCode::UnsupportedFormat, path.string() + ":" + std::to_string(lineno) + ": unknown side " + side);
    }
    if ((r.label == Label::Cancer) != r.cancer_side.has_value()) {
      fail(ErrorCode::UnsupportedFormat,
           path.string() + ":" + std::to_string(lineno) + ": cancer rows need a side, controls none");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_cohort(const std::vector<CaseRecord>& cohort, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir.string());
  std::vector<ManifestRow> rows;
  for (const auto& c : cohort) {
    rows.push_back({c.case_id, c.label, c.cancer_side});
    for (Side s : {Side::Left, Side::Right}) {
      for (View v : {View::Cc, View::Mlo}) {
        save_image(c.view(s, v).image, dir / view_file_name(c.case_id, s, v), 16);
      }
    }
  }
  write_manifest(rows, dir / "manifest.csv");
}

}  // namespace occult
