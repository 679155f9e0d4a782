#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occult/image.hpp"
#include "occult/preprocess.hpp"

namespace occult {

struct PhantomParams {
  int size = 512;                    // square image side, pixels
  double texture_correlation = 0.9;  // shared texture weight between sides
  double lesion_contrast = 0.06;     // additive peak intensity
  double lesion_radius = 24.0;       // pixels; profile sigma is radius / 2
  double lesion_jitter = 8.0;        // pixels
  double noise_sigma = 0.01;         // intensity
};

// Throws InvalidParams.
void validate(const PhantomParams& params);

enum class Label { Control, Cancer };
enum class View { Cc, Mlo };

const char* label_name(Label label) noexcept;
const char* view_name(View view) noexcept;

struct PhantomView {
  GrayImage image;                          // native orientation
  std::vector<unsigned char> breast_mask;   // ground truth, same size
  std::vector<unsigned char> lesion_mask;   // empty when no lesion
  double lesion_x = 0.0;                    // native-frame centre
  double lesion_y = 0.0;
};

// Left views have the chest wall on the left edge, right views on the right.
struct CaseRecord {
  std::string case_id;
  Label label = Label::Control;
  std::optional<Side> cancer_side;
  PhantomView left_cc;
  PhantomView right_cc;
  PhantomView left_mlo;
  PhantomView right_mlo;

  const PhantomView& view(Side side, View v) const;
  bool has_lesion() const noexcept { return cancer_side.has_value(); }
};

CaseRecord generate_case(std::uint64_t seed, const PhantomParams& params, Label label,
                         const std::string& case_id = "case_0000");

// Controls first, then cancers; case i draws from streams keyed by (seed, i),
// so generation order and parallelism never change the output.
std::vector<CaseRecord> generate_cohort(std::uint64_t seed, int n_controls, int n_cancers,
                                        const PhantomParams& params);

// Case `index` of generate_cohort(seed, n_controls, ...), generated alone.
CaseRecord generate_cohort_case(std::uint64_t seed, int index, int n_controls,
                                const PhantomParams& params);

std::string cohort_case_id(int index);

// Raw view file name: <case_id>_<side>_<view>.png
std::string view_file_name(const std::string& case_id, Side side, View view);

// Writes manifest.csv (case_id,label,cancer_side) and one 16-bit PNG per view.
void write_cohort(const std::vector<CaseRecord>& cohort, const std::filesystem::path& dir);

struct ManifestRow {
  std::string case_id;
  Label label = Label::Control;
  std::optional<Side> cancer_side;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);

}  // namespace occult
