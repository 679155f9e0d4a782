#include "occult/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "occult/error.hpp"
#include "occult/fusion.hpp"
#include "occult/image_io.hpp"
#include "occult/preprocess.hpp"
#include "occult/radon.hpp"
#include "occult/simulate.hpp"

namespace fs = std::filesystem;

namespace occult {

namespace {

constexpr std::array<Side, 2> kSides = {Side::Left, Side::Right};
constexpr std::array<View, 2> kViews = {View::Cc, View::Mlo};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform integer in [0, n) without the implementation-defined behaviour of
// std::uniform_int_distribution.
std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t r = gen();
  while (r >= limit) r = gen();
  return r % n;
}

std::string view_key(Side side, View view) {
  return std::string(side_name(side)) + "_" + view_name(view);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::IoFailure, "cannot create directory " + dir.string());
}

// Records what a command wrote. The file says "running" until the command
// finishes, so an interrupted run is recognisable as partial.
class OutputManifest {
 public:
  OutputManifest(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    ensure_dir(dir_);
    write("running", {});
  }

  void add(const fs::path& file) {
    std::lock_guard lock(mutex_);
    files_.insert(fs::relative(file, dir_).generic_string());
  }

  void complete() { write("complete", {}); }
  void partial(const std::string& error) { write("partial", error); }

 private:
  void write(const std::string& status, const std::string& error) {
    std::lock_guard lock(mutex_);
    std::ofstream out(dir_ / "MANIFEST");
    out << "status: " << status << '\n' << "command: " << command_ << '\n';
    if (!error.empty()) out << "error: " << error << '\n';
    out << "files:\n";
    for (const auto& f : files_) out << f << '\n';
  }

  fs::path dir_;
  std::string command_;
  std::mutex mutex_;
  std::set<std::string> files_;
};

template <typename Body>
void with_manifest(const fs::path& dir, const std::string& command, Body&& body) {
  OutputManifest manifest(dir, command);
  try {
    body(manifest);
  } catch (const std::exception& e) {
    manifest.partial(e.what());
    throw;
  }
  manifest.complete();
}

void save_gray(OutputManifest& m, const GrayImage& img, const fs::path& path, int bits = 16) {
  save_image(img, path, bits);
  m.add(path);
}

void save_rgb(OutputManifest& m, const RgbImage& img, const fs::path& path) {
  save_image(img, path, 8);
  m.add(path);
}

void write_text(OutputManifest& m, const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  m.add(path);
}

std::vector<ManifestRow> copy_manifest(const fs::path& in, const fs::path& out, OutputManifest& m) {
  auto rows = read_manifest(in / "manifest.csv");
  write_manifest(rows, out / "manifest.csv");
  m.add(out / "manifest.csv");
  return rows;
}

// Carries a stage's input file through so the next stage finds it in `out`.
void pass_through(const fs::path& in, const fs::path& out, const std::string& name, OutputManifest& m) {
  std::error_code ec;
  fs::copy_file(in / name, out / name, fs::copy_options::overwrite_existing, ec);
  if (ec) fail(ErrorCode::UnreadableFile, "cannot copy " + (in / name).string() + ": " + ec.message());
  m.add(out / name);
}

GrayImage classifier_image(const RcdtImage& rcdt, int width, int height, const PipelineConfig& config,
                           GrayImage* visual) {
  GrayImage vis = visualize_rcdt(rcdt, width, height);
  GrayImage out = resize_bicubic(clahe(vis, config.clahe), config.classifier_width,
                                 config.classifier_height);
  if (visual) *visual = std::move(vis);
  return out;
}

// Shares the template sinogram between the real and simulated pairs.
void transform_view(ViewProducts& p, const PipelineConfig& config) {
  const int w = p.template_image.width();
  const int h = p.template_image.height();
  p.template_sinogram = radon(p.template_image, config.n_theta);
  p.rcdt_real_values = forward_rcdt(p.template_sinogram, radon(p.real_target, config.n_theta));
  p.rcdt_sim_values = forward_rcdt(p.template_sinogram, radon(p.simulated_target, config.n_theta));
  p.rcdt_real = classifier_image(p.rcdt_real_values, w, h, config, &p.rcdt_real_visual);
  p.rcdt_sim = classifier_image(p.rcdt_sim_values, w, h, config, &p.rcdt_sim_visual);
  p.fused = fuse_green_magenta(p.rcdt_real, p.rcdt_sim);
}

// Lazily produces the cases of a run, either generated or read from disk.
struct CohortSource {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::function<CaseImages(std::size_t)> load;
};

CohortSource cohort_source(const PipelineConfig& config) {
  CohortSource src;
  if (!config.cohort_dir.empty()) {
    auto rows = read_manifest(config.cohort_dir / "manifest.csv");
    for (const auto& r : rows) {
      src.ids.push_back(r.case_id);
      src.labels.push_back(r.label == Label::Cancer ? 1 : 0);
    }
    src.load = [rows = std::move(rows), dir = config.cohort_dir](std::size_t i) {
      return load_case_images(rows[i], dir);
    };
    return src;
  }
  const int total = config.n_controls + config.n_cancers;
  for (int i = 0; i < total; ++i) {
    src.ids.push_back(cohort_case_id(i));
    src.labels.push_back(i < config.n_controls ? 0 : 1);
  }
  src.load = [config](std::size_t i) {
    return case_images(generate_cohort_case(config.seed, static_cast<int>(i), config.n_controls,
                                            config.phantom));
  };
  return src;
}

// Alternates cancers and controls from the start of the cohort.
std::set<std::size_t> pick_samples(const std::vector<int>& labels, int count) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] != 0 ? 1 : 0].push_back(i);
  std::set<std::size_t> picked;
  std::array<std::size_t, 2> next = {0, 0};
  int cls = 1;
  while (static_cast<int>(picked.size()) < count &&
         (next[0] < by_class[0].size() || next[1] < by_class[1].size())) {
    const auto c = static_cast<std::size_t>(cls);
    if (next[c] < by_class[c].size()) picked.insert(by_class[c][next[c]++]);
    cls = 1 - cls;
  }
  return picked;
}

void export_samples(const fs::path& dir, const CaseImages& images, View view, const ViewProducts& p,
                    OutputManifest& m) {
  ensure_dir(dir);
  const std::string v = view_name(view);
  for (Side s : kSides) save_gray(m, images.view(s, view), dir / (view_key(s, view) + "_raw.png"));
  save_gray(m, p.template_image, dir / (v + "_1_template.png"));
  save_gray(m, p.real_target, dir / (v + "_2_real_target.png"));
  save_gray(m, p.simulated_native, dir / (v + "_3_simulated.png"));
  save_gray(m, p.simulated_target, dir / (v + "_4_simulated_target.png"));
  const fs::path sino = dir / (v + "_5_template_sinogram.png");
  dump_sinogram(p.template_sinogram, sino);
  m.add(sino);
  m.add(fs::path(sino.string() + ".txt"));
  const fs::path values = dir / (v + "_6_rcdt_real_values.png");
  dump_sinogram(p.rcdt_real_values.values, values);
  m.add(values);
  m.add(fs::path(values.string() + ".txt"));
  save_gray(m, p.rcdt_real_visual, dir / (v + "_7_rcdt_real_visual.png"));
  save_gray(m, p.rcdt_sim_visual, dir / (v + "_7_rcdt_sim_visual.png"));
  save_gray(m, p.rcdt_real, dir / (v + "_8_rcdt_real.png"));
  save_gray(m, p.rcdt_sim, dir / (v + "_8_rcdt_sim.png"));
  save_rgb(m, p.fused, dir / (v + "_9_fused.png"));
}

CaseFeatures load_case_features(const ManifestRow& row, const fs::path& dir, const PipelineConfig& config) {
  CaseFeatures f;
  f.case_id = row.case_id;
  f.positive = row.label == Label::Cancer;
  for (View v : kViews) {
    append_view_features(f, load_image(dir / rcdt_file_name(row.case_id, v, Arm::Real)),
                         load_image(dir / rcdt_file_name(row.case_id, v, Arm::Simulated)),
                         load_rgb_image(dir / rcdt_file_name(row.case_id, v, Arm::Fused)), config);
  }
  return f;
}

std::vector<double> window_scores(const LogisticModel& model, const std::vector<FeatureVector>& windows) {
  std::vector<double> s;
  s.reserve(windows.size());
  for (const auto& w : windows) s.push_back(predict(model, w));
  return s;
}

nlohmann::json roc_json(const RocResult& r, const OperatingPoint& op) {
  return {{"auc", r.auc},
          {"variance", r.variance},
          {"ci95", {r.ci_lo, r.ci_hi}},
          {"median_positive", op.median_positive},
          {"median_negative", op.median_negative},
          {"midpoint_threshold", op.threshold},
          {"summary", format_auc(r)}};
}

nlohmann::json comparison_json(const std::string& name, const DelongComparison& c) {
  return {{"comparison", name},   {"auc_a", c.auc_a},          {"auc_b", c.auc_b},
          {"diff", c.diff},       {"ci95", {c.ci_lo, c.ci_hi}}, {"z", c.z},
          {"p_value", c.p_value}, {"summary", format_comparison(c)}};
}

nlohmann::json arms_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["positives"] = r.positives;
  j["negatives"] = r.negatives;
  for (Arm a : kArms) {
    const auto k = static_cast<std::size_t>(a);
    j["arms"][arm_key(a)] = roc_json(r.roc[k], r.operating[k]);
  }
  return j;
}

nlohmann::json comparisons_json(const EvaluationReport& r) {
  return nlohmann::json::array({comparison_json("Fused - Real", r.fused_vs_real),
                                comparison_json("Fused - Simulated", r.fused_vs_sim)});
}

}  // namespace

Side opposite(Side side) noexcept { return side == Side::Left ? Side::Right : Side::Left; }

Side template_side(const std::optional<Side>& cancer_side) noexcept {
  return cancer_side.value_or(Side::Left);
}

Side simulator_input_side(const std::optional<Side>& cancer_side) noexcept {
  return cancer_side ? opposite(*cancer_side) : Side::Left;
}

const GrayImage& CaseImages::view(Side side, View v) const {
  if (v == View::Cc) return side == Side::Left ? left_cc : right_cc;
  return side == Side::Left ? left_mlo : right_mlo;
}

GrayImage& CaseImages::view(Side side, View v) {
  return const_cast<GrayImage&>(std::as_const(*this).view(side, v));
}

CaseImages case_images(const CaseRecord& record) {
  CaseImages c;
  c.case_id = record.case_id;
  c.label = record.label;
  c.cancer_side = record.cancer_side;
  for (Side s : kSides) {
    for (View v : kViews) c.view(s, v) = record.view(s, v).image;
  }
  return c;
}

CaseImages load_case_images(const ManifestRow& row, const fs::path& dir) {
  CaseImages c;
  c.case_id = row.case_id;
  c.label = row.label;
  c.cancer_side = row.cancer_side;
  for (Side s : kSides) {
    for (View v : kViews) c.view(s, v) = load_image(dir / view_file_name(row.case_id, s, v));
  }
  return c;
}

std::string simulated_file_name(const std::string& case_id, Side side, View view) {
  return external_image_name(case_id, view_key(side, view));
}

std::string rcdt_file_name(const std::string& case_id, View view, Arm arm) {
  const std::string base = case_id + "_" + view_name(view);
  switch (arm) {
    case Arm::Real: return base + "_rcdt_real.png";
    case Arm::Simulated: return base + "_rcdt_sim.png";
    case Arm::Fused: break;
  }
  return base + "_fused.png";
}

const char* arm_key(Arm arm) noexcept {
  switch (arm) {
    case Arm::Real: return "real";
    case Arm::Simulated: return "sim";
    case Arm::Fused: break;
  }
  return "fused";
}

const char* arm_name(Arm arm) noexcept {
  switch (arm) {
    case Arm::Real: return "Real";
    case Arm::Simulated: return "Simulated";
    case Arm::Fused: break;
  }
  return "Fused";
}

GrayImage rcdt_classifier_image(const RcdtImage& rcdt, const PipelineConfig& config, GrayImage* visual) {
  return classifier_image(rcdt, config.image_width, config.image_height, config, visual);
}

ViewProducts process_view(const CaseImages& images, View view, const PipelineConfig& config) {
  const Side ts = template_side(images.cancer_side);
  const Side input_side = simulator_input_side(images.cancer_side);
  const Side sim_side = opposite(input_side);
  std::array<GrayImage, 2> pre;
  for (Side s : kSides) {
    pre[static_cast<std::size_t>(s)] =
        preprocess_view(images.view(s, view), s, config.image_width, config.image_height);
  }
  ViewProducts p;
  p.template_image = pre[static_cast<std::size_t>(ts)];
  p.real_target = pre[static_cast<std::size_t>(opposite(ts))];
  p.simulated_native = simulate_contralateral(
      standardize_orientation(pre[static_cast<std::size_t>(input_side)], input_side), config.simulator,
      images.case_id, view_key(sim_side, view));
  p.simulated_target = standardize_orientation(p.simulated_native, sim_side);
  transform_view(p, config);
  return p;
}

void append_view_features(CaseFeatures& features, const GrayImage& rcdt_real, const GrayImage& rcdt_sim,
                          const RgbImage& fused, const PipelineConfig& config) {
  const int w = rcdt_real.width();
  const int h = rcdt_real.height();
  if (rcdt_sim.width() != w || rcdt_sim.height() != h || fused.width() != w || fused.height() != h) {
    fail(ErrorCode::GridMismatch, "RCDT and fused images of one view differ in size");
  }
  const WindowGrid grid = extract_windows(w, h, config.window, config.stride_x, config.stride_y);
  const int n = config.window;
  for (const auto& pos : grid.positions) {
    features.arms[0].push_back(window_features(crop(rcdt_real, pos.x, pos.y, n, n)));
    features.arms[1].push_back(window_features(crop(rcdt_sim, pos.x, pos.y, n, n)));
    features.arms[2].push_back(window_features(crop(fused, pos.x, pos.y, n, n)));
  }
}

CaseFeatures case_features(const CaseImages& images, const PipelineConfig& config) {
  CaseFeatures f;
  f.case_id = images.case_id;
  f.positive = images.label == Label::Cancer;
  for (View v : kViews) {
    const ViewProducts p = process_view(images, v, config);
    append_view_features(f, p.rcdt_real, p.rcdt_sim, p.fused, config);
  }
  return f;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] != 0 ? 1 : 0].push_back(i);
  if (folds < 2) fail(ErrorCode::InvalidParams, "at least 2 folds are needed");
  if (static_cast<std::size_t>(folds) > labels.size()) {
    fail(ErrorCode::InvalidParams, "more folds than cases");
  }
  if (by_class[0].size() < 2 || by_class[1].size() < 2) {
    fail(ErrorCode::InvalidParams, "cross-validation needs at least 2 cases of each class");
  }
  std::mt19937_64 gen(splitmix64(seed ^ 0xF01D5EEDULL));
  std::vector<int> fold_of(labels.size(), 0);
  std::size_t dealt = 0;
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[bounded(gen, i)]);
    for (std::size_t idx : members) fold_of[idx] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

ScoreTable cross_validate(const std::vector<CaseFeatures>& cases, const std::vector<int>& fold_of,
                          const TrainOptions& options, std::vector<std::array<LogisticModel, 3>>* models) {
  if (cases.size() != fold_of.size()) fail(ErrorCode::LengthMismatch, "one fold index per case is needed");
  if (cases.empty()) fail(ErrorCode::EmptyInput, "no cases to cross-validate");
  const int n_folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  ScoreTable table(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    table[i].case_id = cases[i].case_id;
    table[i].positive = cases[i].positive;
  }
  if (models) models->assign(static_cast<std::size_t>(n_folds), {});
  for (int k = 0; k < n_folds; ++k) {
    for (Arm arm : kArms) {
      const auto a = static_cast<std::size_t>(arm);
      std::vector<FeatureVector> x;
      std::vector<int> y;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        if (fold_of[i] == k) continue;
        for (const auto& w : cases[i].arms[a]) {
          x.push_back(w);
          y.push_back(cases[i].positive ? 1 : 0);
        }
      }
      LogisticModel model = train_logistic(x, y, options);
      model.feature_names = feature_names(arm == Arm::Fused ? 3 : 1);
      for (std::size_t i = 0; i < cases.size(); ++i) {
        if (fold_of[i] != k) continue;
        const double s = score_case(window_scores(model, cases[i].arms[a]));
        (arm == Arm::Real ? table[i].score_real : arm == Arm::Simulated ? table[i].score_sim
                                                                       : table[i].score_fused) = s;
      }
      if (models) (*models)[static_cast<std::size_t>(k)][a] = std::move(model);
    }
  }
  return table;
}

std::vector<double> arm_scores(const ScoreTable& table, Arm arm) {
  std::vector<double> s;
  s.reserve(table.size());
  for (const auto& r : table) {
    s.push_back(arm == Arm::Real ? r.score_real : arm == Arm::Simulated ? r.score_sim : r.score_fused);
  }
  return s;
}

std::vector<int> table_labels(const ScoreTable& table) {
  std::vector<int> y;
  y.reserve(table.size());
  for (const auto& r : table) y.push_back(r.positive ? 1 : 0);
  return y;
}

EvaluationReport evaluate_scores(const ScoreTable& table) {
  const auto labels = table_labels(table);
  EvaluationReport r;
  r.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  r.negatives = labels.size() - r.positives;
  for (Arm arm : kArms) {
    const auto a = static_cast<std::size_t>(arm);
    const auto scores = arm_scores(table, arm);
    r.roc[a] = roc_auc(scores, labels);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
    r.operating[a] = {median(pos), median(neg), midpoint_threshold(pos, neg)};
  }
  const auto fused = arm_scores(table, Arm::Fused);
  r.fused_vs_real = delong_compare(fused, arm_scores(table, Arm::Real), labels);
  r.fused_vs_sim = delong_compare(fused, arm_scores(table, Arm::Simulated), labels);
  return r;
}

std::string format_auc_lines(const EvaluationReport& report) {
  std::string out = "Cases: " + std::to_string(report.positives + report.negatives) + " (" +
                    std::to_string(report.positives) + " positive, " + std::to_string(report.negatives) +
                    " negative)\n";
  for (Arm arm : kArms) {
    const auto a = static_cast<std::size_t>(arm);
    out += std::string(arm_name(arm)) + ": " + format_auc(report.roc[a]) + "\n";
  }
  for (Arm arm : kArms) {
    const auto& op = report.operating[static_cast<std::size_t>(arm)];
    out += std::string(arm_name(arm)) + " threshold: " + format_metric(op.threshold) +
           " (median positive " + format_metric(op.median_positive) + ", median negative " +
           format_metric(op.median_negative) + ")\n";
  }
  return out;
}

std::string format_comparison_lines(const EvaluationReport& report) {
  return "Fused - Real: " + format_comparison(report.fused_vs_real) + "\n" +
         "Fused - Simulated: " + format_comparison(report.fused_vs_sim) + "\n";
}

std::string format_report(const EvaluationReport& report) {
  return format_auc_lines(report) + format_comparison_lines(report);
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::json j = arms_json(report);
  j["comparisons"] = comparisons_json(report);
  return j.dump(2) + "\n";
}

void write_roc_curves(const EvaluationReport& report, const fs::path& dir) {
  for (Arm arm : kArms) {
    write_roc_curve(report.roc[static_cast<std::size_t>(arm)], dir / ("roc_" + std::string(arm_key(arm)) + ".csv"));
  }
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ExperimentResult run_experiment(const PipelineConfig& config, const ProgressFn& progress) {
  validate(config);
  const CohortSource src = cohort_source(config);
  ExperimentResult result;
  result.folds = stratified_folds(src.labels, config.folds, config.seed);
  const fs::path out = config.out;
  with_manifest(out, "run", [&](OutputManifest& m) {
    write_text(m, out / "config.txt", format_config(config));
    const auto samples = pick_samples(src.labels, config.sample_cases);
    std::vector<CaseFeatures> features(src.ids.size());
    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(src.ids.size(), config.jobs, [&](std::size_t i) {
      const CaseImages images = src.load(i);
      CaseFeatures f;
      f.case_id = images.case_id;
      f.positive = images.label == Label::Cancer;
      for (View v : kViews) {
        const ViewProducts p = process_view(images, v, config);
        append_view_features(f, p.rcdt_real, p.rcdt_sim, p.fused, config);
        if (samples.count(i)) export_samples(out / "samples" / images.case_id, images, v, p, m);
      }
      features[i] = std::move(f);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(++done, src.ids.size());
      }
    });

    std::vector<std::array<LogisticModel, 3>> models;
    result.scores = cross_validate(features, result.folds, config.train, &models);
    write_score_table(result.scores, out / "score_table.csv");
    m.add(out / "score_table.csv");

    std::string folds_csv = "case_id,fold\n";
    for (std::size_t i = 0; i < src.ids.size(); ++i) {
      folds_csv += src.ids[i] + "," + std::to_string(result.folds[i]) + "\n";
    }
    write_text(m, out / "folds.csv", folds_csv);

    ensure_dir(out / "models");
    for (std::size_t k = 0; k < models.size(); ++k) {
      for (Arm arm : kArms) {
        const fs::path p = out / "models" / ("fold" + std::to_string(k) + "_" + arm_key(arm) + ".txt");
        save_model(models[k][static_cast<std::size_t>(arm)], p);
        m.add(p);
      }
    }

    result.report = evaluate_scores(result.scores);
    write_roc_curves(result.report, out);
    for (Arm arm : kArms) m.add(out / ("roc_" + std::string(arm_key(arm)) + ".csv"));
    write_text(m, out / "report.txt", format_report(result.report));
    write_text(m, out / "report.json", report_json(result.report));
  });
  return result;
}

void stage_phantom(const PipelineConfig& config, const fs::path& out) {
  validate(config);
  with_manifest(out, "phantom", [&](OutputManifest& m) {
    const auto total = static_cast<std::size_t>(config.n_controls + config.n_cancers);
    std::vector<ManifestRow> rows(total);
    parallel_for(total, config.jobs, [&](std::size_t i) {
      const CaseRecord rec =
          generate_cohort_case(config.seed, static_cast<int>(i), config.n_controls, config.phantom);
      for (Side s : kSides) {
        for (View v : kViews) save_gray(m, rec.view(s, v).image, out / view_file_name(rec.case_id, s, v));
      }
      rows[i] = {rec.case_id, rec.label, rec.cancer_side};
    });
    write_manifest(rows, out / "manifest.csv");
    m.add(out / "manifest.csv");
  });
}

void stage_preprocess(const PipelineConfig& config, const fs::path& in, const fs::path& out) {
  validate(config);
  with_manifest(out, "preprocess", [&](OutputManifest& m) {
    const auto rows = copy_manifest(in, out, m);
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
      const CaseImages images = load_case_images(rows[i], in);
      for (Side s : kSides) {
        for (View v : kViews) {
          save_gray(m, preprocess_view(images.view(s, v), s, config.image_width, config.image_height),
                    out / view_file_name(rows[i].case_id, s, v));
        }
      }
    });
  });
}

void stage_simulate(const PipelineConfig& config, const fs::path& in, const fs::path& out) {
  validate(config);
  with_manifest(out, "simulate", [&](OutputManifest& m) {
    const auto rows = copy_manifest(in, out, m);
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
      const auto& row = rows[i];
      const Side input_side = simulator_input_side(row.cancer_side);
      const Side sim_side = opposite(input_side);
      for (Side s : kSides) {
        for (View v : kViews) pass_through(in, out, view_file_name(row.case_id, s, v), m);
      }
      for (View v : kViews) {
        // Preprocessed views are standardized; the simulator works in native orientation.
        const GrayImage input =
            standardize_orientation(load_image(in / view_file_name(row.case_id, input_side, v)), input_side);
        save_gray(m, simulate_contralateral(input, config.simulator, row.case_id, view_key(sim_side, v)),
                  out / simulated_file_name(row.case_id, sim_side, v));
      }
    });
  });
}

void stage_rcdt(const PipelineConfig& config, const fs::path& in, const fs::path& out) {
  validate(config);
  with_manifest(out, "rcdt", [&](OutputManifest& m) {
    const auto rows = copy_manifest(in, out, m);
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
      const auto& row = rows[i];
      const Side ts = template_side(row.cancer_side);
      const Side sim_side = opposite(simulator_input_side(row.cancer_side));
      for (View v : kViews) {
        ViewProducts p;
        p.template_image = load_image(in / view_file_name(row.case_id, ts, v));
        p.real_target = load_image(in / view_file_name(row.case_id, opposite(ts), v));
        p.simulated_native = load_image(in / simulated_file_name(row.case_id, sim_side, v));
        p.simulated_target = standardize_orientation(p.simulated_native, sim_side);
        transform_view(p, config);
        save_gray(m, p.rcdt_real, out / rcdt_file_name(row.case_id, v, Arm::Real));
        save_gray(m, p.rcdt_sim, out / rcdt_file_name(row.case_id, v, Arm::Simulated));
      }
    });
  });
}

void stage_fuse(const PipelineConfig& config, const fs::path& in, const fs::path& out) {
  validate(config);
  with_manifest(out, "fuse", [&](OutputManifest& m) {
    const auto rows = copy_manifest(in, out, m);
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
      for (View v : kViews) {
        const auto& id = rows[i].case_id;
        pass_through(in, out, rcdt_file_name(id, v, Arm::Real), m);
        pass_through(in, out, rcdt_file_name(id, v, Arm::Simulated), m);
        save_rgb(m,
                 fuse_green_magenta(load_image(in / rcdt_file_name(id, v, Arm::Real)),
                                    load_image(in / rcdt_file_name(id, v, Arm::Simulated))),
                 out / rcdt_file_name(id, v, Arm::Fused));
      }
    });
  });
}

void stage_train(const PipelineConfig& config, const fs::path& in, const fs::path& out) {
  validate(config);
  with_manifest(out, "train", [&](OutputManifest& m) {
    const auto rows = read_manifest(in / "manifest.csv");
    std::vector<CaseFeatures> cases(rows.size());
    parallel_for(rows.size(), config.jobs,
                 [&](std::size_t i) { cases[i] = load_case_features(rows[i], in, config); });
    for (Arm arm : kArms) {
      const auto a = static_cast<std::size_t>(arm);
      std::vector<FeatureVector> x;
      std::vector<int> y;
      for (const auto& c : cases) {
        for (const auto& w : c.arms[a]) {
          x.push_back(w);
          y.push_back(c.positive ? 1 : 0);
        }
      }
      LogisticModel model = train_logistic(x, y, config.train);
      model.feature_names = feature_names(arm == Arm::Fused ? 3 : 1);
      const fs::path p = out / ("model_" + std::string(arm_key(arm)) + ".txt");
      save_model(model, p);
      m.add(p);
    }
  });
}

void stage_score(const PipelineConfig& config, const fs::path& in, const fs::path& models,
                 const fs::path& out) {
  validate(config);
  with_manifest(out, "score", [&](OutputManifest& m) {
    const auto rows = read_manifest(in / "manifest.csv");
    std::array<LogisticModel, 3> model;
    for (Arm arm : kArms) {
      model[static_cast<std::size_t>(arm)] = load_model(models / ("model_" + std::string(arm_key(arm)) + ".txt"));
    }
    ScoreTable table(rows.size());
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
      const CaseFeatures f = load_case_features(rows[i], in, config);
      table[i] = {f.case_id, f.positive, score_case(window_scores(model[0], f.arms[0])),
                  score_case(window_scores(model[1], f.arms[1])),
                  score_case(window_scores(model[2], f.arms[2]))};
    });
    write_score_table(table, out / "score_table.csv");
    m.add(out / "score_table.csv");
  });
}

EvaluationReport stage_evaluate(const fs::path& score_table, const fs::path& out) {
  EvaluationReport report;
  with_manifest(out, "evaluate", [&](OutputManifest& m) {
    report = evaluate_scores(read_score_table(score_table));
    write_roc_curves(report, out);
    for (Arm arm : kArms) m.add(out / ("roc_" + std::string(arm_key(arm)) + ".csv"));
    write_text(m, out / "evaluation.txt", format_auc_lines(report));
    write_text(m, out / "evaluation.json", arms_json(report).dump(2) + "\n");
  });
  return report;
}

EvaluationReport stage_compare(const fs::path& score_table, const fs::path& out) {
  EvaluationReport report;
  with_manifest(out, "compare", [&](OutputManifest& m) {
    report = evaluate_scores(read_score_table(score_table));
    write_text(m, out / "comparison.txt", format_comparison_lines(report));
    write_text(m, out / "comparison.json", comparisons_json(report).dump(2) + "\n");
  });
  return report;
}

}  // namespace occult
