#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "occult/classify.hpp"
#include "occult/config.hpp"
#include "occult/eval.hpp"
#include "occult/phantom.hpp"
#include "occult/rcdt.hpp"

namespace occult {

// The cancer side for cancer cases, left for controls.
Side template_side(const std::optional<Side>& cancer_side) noexcept;
// Side handed to the simulator: left for controls, the normal side for
// cancer cases. The simulated image stands in for the opposite side.
Side simulator_input_side(const std::optional<Side>& cancer_side) noexcept;
Side opposite(Side side) noexcept;

// Raw views of one case in native orientation.
struct CaseImages {
  std::string case_id;
  Label label = Label::Control;
  std::optional<Side> cancer_side;
  GrayImage left_cc, right_cc, left_mlo, right_mlo;

  const GrayImage& view(Side side, View v) const;
  GrayImage& view(Side side, View v);
};

CaseImages case_images(const CaseRecord& record);
// Reads <dir>/<case_id>_<side>_<view>.png for all four views.
CaseImages load_case_images(const ManifestRow& row, const std::filesystem::path& dir);

// Everything derived from one view of one case. Preprocessed images are in
// the standardized orientation at the configured image size; the RCDT
// images are contrast enhanced and resized to the classifier size.
struct ViewProducts {
  GrayImage template_image;
  GrayImage real_target;
  GrayImage simulated_native;  // simulator output, orientation of the simulated side
  GrayImage simulated_target;
  Sinogram template_sinogram;
  RcdtImage rcdt_real_values;
  RcdtImage rcdt_sim_values;
  GrayImage rcdt_real_visual;  // image size, before contrast enhancement
  GrayImage rcdt_sim_visual;
  GrayImage rcdt_real;
  GrayImage rcdt_sim;
  RgbImage fused;  // G = real-pair RCDT, R = B = simulated-pair RCDT
};

// Preprocess both sides, simulate, transform, enhance and fuse one view.
ViewProducts process_view(const CaseImages& images, View view, const PipelineConfig& config);

// Visualize, enhance and resize one transform to the classifier input.
GrayImage rcdt_classifier_image(const RcdtImage& rcdt, const PipelineConfig& config,
                                GrayImage* visual = nullptr);

enum class Arm { Real, Simulated, Fused };
inline constexpr std::array<Arm, 3> kArms = {Arm::Real, Arm::Simulated, Arm::Fused};
const char* arm_key(Arm arm) noexcept;   // "real", "sim", "fused"
const char* arm_name(Arm arm) noexcept;  // "Real", "Simulated", "Fused"

// Window features pooled over both views, one vector per window.
struct CaseFeatures {
  std::string case_id;
  bool positive = false;
  std::array<std::vector<FeatureVector>, 3> arms;  // indexed by Arm
};

void append_view_features(CaseFeatures& features, const GrayImage& rcdt_real,
                          const GrayImage& rcdt_sim, const RgbImage& fused,
                          const PipelineConfig& config);

CaseFeatures case_features(const CaseImages& images, const PipelineConfig& config);

// Class-stratified fold index per case: each class is shuffled with a seeded
// generator and dealt round-robin into the folds. Throws InvalidParams.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

// Trains one model per arm on all but each fold and scores the held-out
// cases; every case is scored exactly once.
ScoreTable cross_validate(const std::vector<CaseFeatures>& cases, const std::vector<int>& fold_of,
                          const TrainOptions& options,
                          std::vector<std::array<LogisticModel, 3>>* models = nullptr);

struct OperatingPoint {
  double median_positive = 0.0;
  double median_negative = 0.0;
  double threshold = 0.0;
};

struct EvaluationReport {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::array<RocResult, 3> roc;               // indexed by Arm
  std::array<OperatingPoint, 3> operating;    // indexed by Arm
  DelongComparison fused_vs_real;
  DelongComparison fused_vs_sim;
};

EvaluationReport evaluate_scores(const ScoreTable& table);
std::vector<double> arm_scores(const ScoreTable& table, Arm arm);
std::vector<int> table_labels(const ScoreTable& table);

std::string format_auc_lines(const EvaluationReport& report);
std::string format_comparison_lines(const EvaluationReport& report);
std::string format_report(const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

// Writes roc_<arm>.csv for every arm.
void write_roc_curves(const EvaluationReport& report, const std::filesystem::path& dir);

// Runs cases through `fn` on up to `jobs` threads (0 = hardware threads).
// Results must be written by index; the first failure by index is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

struct ExperimentResult {
  ScoreTable scores;
  std::vector<int> folds;
  EvaluationReport report;
};

// Full three-arm experiment. Writes into config.out: score_table.csv,
// folds.csv, roc_<arm>.csv, report.txt, report.json, config.txt, per-fold
// models, sample images of every stage, and MANIFEST.
// `progress`, when set, is called after each case with (done, total).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;
ExperimentResult run_experiment(const PipelineConfig& config, const ProgressFn& progress = {});

// Directory stages. Each reads manifest.csv from `in`, copies it to `out`,
// writes its images, and records the outcome in <out>/MANIFEST. simulate and
// fuse also copy their inputs to `out`, so the stages chain directory to
// directory: phantom, preprocess, simulate, rcdt, fuse, then train and score.
void stage_phantom(const PipelineConfig& config, const std::filesystem::path& out);
void stage_preprocess(const PipelineConfig& config, const std::filesystem::path& in,
                      const std::filesystem::path& out);
void stage_simulate(const PipelineConfig& config, const std::filesystem::path& in,
                    const std::filesystem::path& out);
void stage_rcdt(const PipelineConfig& config, const std::filesystem::path& in,
                const std::filesystem::path& out);
void stage_fuse(const PipelineConfig& config, const std::filesystem::path& in,
                const std::filesystem::path& out);
// Trains model_<arm>.txt from the RCDT and fused images in `in`.
void stage_train(const PipelineConfig& config, const std::filesystem::path& in,
                 const std::filesystem::path& out);
// Scores every case in `in` with the models in `models`; writes score_table.csv.
void stage_score(const PipelineConfig& config, const std::filesystem::path& in,
                 const std::filesystem::path& models, const std::filesystem::path& out);
// From a score table: ROC curves and AUCs with confidence intervals.
EvaluationReport stage_evaluate(const std::filesystem::path& score_table,
                                const std::filesystem::path& out);
// From a score table: paired DeLong comparisons of Fused against the others.
EvaluationReport stage_compare(const std::filesystem::path& score_table,
                               const std::filesystem::path& out);

// Stage file names.
std::string simulated_file_name(const std::string& case_id, Side side, View view);
std::string rcdt_file_name(const std::string& case_id, View view, Arm arm);

}  // namespace occult
