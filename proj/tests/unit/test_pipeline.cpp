#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "occult/error.hpp"
#include "occult/image.hpp"
#include "occult/image_io.hpp"
#include "occult/pipeline.hpp"
#include "occult/preprocess.hpp"
#include "support/support.hpp"

using namespace occult;
using testsupport::Rng;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig c;
  c.image_width = 250;
  c.image_height = 400;
  c.n_theta = 60;
  c.phantom.size = 256;
  c.phantom.lesion_radius = 10;
  c.phantom.lesion_jitter = 4;
  c.phantom.lesion_contrast = 0.2;
  c.n_controls = 10;
  c.n_cancers = 5;
  c.train.epochs = 60;
  c.sample_cases = 1;
  c.out = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double max_abs_diff(const GrayImage& a, const GrayImage& b) {
  REQUIRE(a.width() == b.width());
  REQUIRE(a.height() == b.height());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.pixels()[i] - b.pixels()[i]));
  return worst;
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

TEST_CASE("pairing protocol") {
  CHECK(template_side(std::nullopt) == Side::Left);
  CHECK(template_side(Side::Right) == Side::Right);
  CHECK(simulator_input_side(std::nullopt) == Side::Left);
  CHECK(simulator_input_side(Side::Left) == Side::Right);
  CHECK(simulator_input_side(Side::Right) == Side::Left);
}

TEST_CASE("simulated targets share the template orientation") {
  testsupport::TempDir dir("pipeline_view");
  const PipelineConfig cfg = small_config(dir.path());
  // One control and cancers on both sides.
  std::set<std::string> kinds;
  for (int i = 0; i < 16 && kinds.size() < 3; ++i) {
    const CaseImages img = case_images(generate_cohort_case(cfg.seed, i, 1, cfg.phantom));
    const std::string kind = img.cancer_side ? (*img.cancer_side == Side::Left ? "left" : "right") : "control";
    if (!kinds.insert(kind).second) continue;
    CAPTURE(kind);
    const ViewProducts p = process_view(img, View::Cc, cfg);
    const Side in = simulator_input_side(img.cancer_side);
    const GrayImage input = preprocess_view(img.view(in, View::Cc), in, cfg.image_width, cfg.image_height);
    CHECK(max_abs_diff(p.simulated_target, clamp01(gaussian_blur(input, cfg.simulator.smoothing_sigma))) < 1e-12);
    CHECK(p.template_image == preprocess_view(img.view(template_side(img.cancer_side), View::Cc),
                                              template_side(img.cancer_side), cfg.image_width, cfg.image_height));
    CHECK(p.rcdt_real.width() == cfg.classifier_width);
    CHECK(p.rcdt_real.height() == cfg.classifier_height);
    CHECK(p.fused.width() == cfg.classifier_width);
    CHECK(p.fused.at(10, 10, 1) == p.rcdt_real.at(10, 10));
    CHECK(p.fused.at(10, 10, 0) == p.rcdt_sim.at(10, 10));
  }
  CHECK(kinds.size() == 3);
}

TEST_CASE("stratified folds are disjoint, exhaustive and balanced") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + rng.below(6);
    const int n = 2 * k + rng.below(60);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& l : labels) l = rng.below(3) == 0;
    labels[0] = labels[1] = 1;
    labels[2] = labels[3] = 0;
    const auto seed = static_cast<std::uint64_t>(rng.below(1000));
    const std::vector<int> f = stratified_folds(labels, k, seed);
    REQUIRE(f.size() == labels.size());
    CHECK(f == stratified_folds(labels, k, seed));
    for (int cls : {0, 1}) {
      std::vector<int> per(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < f.size(); ++i) {
        REQUIRE(f[i] >= 0);
        REQUIRE(f[i] < k);
        if (labels[i] == cls) ++per[static_cast<std::size_t>(f[i])];
      }
      CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
    }
  }
  CHECK(code_of([] { stratified_folds(std::vector<int>{0, 1, 0, 1}, 1, 1); }) == ErrorCode::InvalidParams);
  CHECK(code_of([] { stratified_folds(std::vector<int>{0, 0, 0, 1}, 2, 1); }) == ErrorCode::InvalidParams);
}

TEST_CASE("cross-validation scores every case once") {
  Rng rng(2);
  std::vector<CaseFeatures> cases;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    CaseFeatures f;
    f.case_id = "c" + std::to_string(i);
    f.positive = i % 3 == 0;
    for (int w = 0; w < 5; ++w) {
      const double shift = f.positive ? 1.0 : 0.0;
      f.arms[0].push_back({shift + rng.normal(), rng.normal()});
      f.arms[1].push_back({rng.normal(), rng.normal()});
      f.arms[2].push_back({shift + rng.normal(), rng.normal(), rng.normal()});
    }
    labels.push_back(f.positive);
    cases.push_back(std::move(f));
  }
  const auto folds = stratified_folds(labels, 5, 3);
  std::vector<std::array<LogisticModel, 3>> models;
  const ScoreTable t = cross_validate(cases, folds, {0.5, 50, 1e-3}, &models);
  REQUIRE(t.size() == 30);
  CHECK(models.size() == 5);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t[i].case_id == cases[i].case_id);
    CHECK(t[i].positive == cases[i].positive);
    for (double s : {t[i].score_real, t[i].score_sim, t[i].score_fused}) {
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
    // The held-out score comes from the model of the case's own fold.
    std::vector<double> w;
    for (const auto& fv : cases[i].arms[0]) w.push_back(predict(models[static_cast<std::size_t>(folds[i])][0], fv));
    CHECK(t[i].score_real == score_case(w));
  }
  CHECK(cross_validate(cases, folds, {0.5, 50, 1e-3}).size() == 30);
}

TEST_CASE("parallel_for covers every index and rethrows the first failure") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  try {
    parallel_for(20, 3, [](std::size_t i) {
      if (i == 7 || i == 13) fail(ErrorCode::Numerical, "index " + std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("index 7") != std::string::npos);
  }
}

TEST_CASE("evaluation report") {
  ScoreTable t;
  for (int i = 0; i < 20; ++i) {
    const bool pos = i < 8;
    t.push_back({"c" + std::to_string(i), pos, pos ? 0.6 + 0.01 * i : 0.3 + 0.01 * i, 0.5,
                 pos ? 0.9 : 0.1});
  }
  const EvaluationReport r = evaluate_scores(t);
  CHECK(r.positives == 8);
  CHECK(r.negatives == 12);
  CHECK(r.roc[0].auc == 1.0);
  CHECK(r.roc[1].auc == 0.5);
  CHECK(r.fused_vs_real.diff == 0.0);
  CHECK(r.fused_vs_sim.diff == 0.5);
  CHECK(r.operating[2].threshold == doctest::Approx(0.5));
  const std::string text = format_report(r);
  for (const char* line : {"Real: AUC", "Simulated: AUC", "Fused: AUC", "Fused - Real: ", "Fused - Simulated: "})
    CHECK(text.find(line) != std::string::npos);
}

TEST_CASE("small experiment end to end") {
  testsupport::TempDir dir("pipeline_run");
  PipelineConfig cfg = small_config(dir / "a");
  cfg.jobs = 1;
  std::size_t calls = 0;
  const ExperimentResult a = run_experiment(cfg, [&](std::size_t done, std::size_t total) {
    ++calls;
    CHECK(done <= total);
  });
  CHECK(calls == 15);
  REQUIRE(a.scores.size() == 15);
  std::set<std::string> ids;
  for (const auto& r : a.scores) ids.insert(r.case_id);
  CHECK(ids.size() == 15);
  std::vector<int> per_fold(5, 0);
  for (int f : a.folds) ++per_fold[static_cast<std::size_t>(f)];
  CHECK(std::all_of(per_fold.begin(), per_fold.end(), [](int c) { return c == 3; }));

  for (const char* f : {"score_table.csv", "folds.csv", "roc_real.csv", "roc_sim.csv", "roc_fused.csv",
                        "report.txt", "report.json", "config.txt", "MANIFEST", "models/fold0_real.txt"}) {
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  }
  const std::string manifest = slurp(dir / "a" / "MANIFEST");
  CHECK(manifest.rfind("status: complete", 0) == 0);
  CHECK(manifest.find("score_table.csv") != std::string::npos);
  CHECK(fs::exists(dir / "a" / "samples"));
  CHECK(load_config(dir / "a" / "config.txt").n_controls == 10);

  // Same configuration, different worker count: identical outputs.
  cfg.out = dir / "b";
  cfg.jobs = 3;
  run_experiment(cfg);
  CHECK(slurp(dir / "a" / "score_table.csv") == slurp(dir / "b" / "score_table.csv"));
  CHECK(slurp(dir / "a" / "report.txt") == slurp(dir / "b" / "report.txt"));
}

TEST_CASE("a failed run leaves a partial manifest") {
  testsupport::TempDir dir("pipeline_fail");
  PipelineConfig cfg = small_config(dir / "out");
  cfg.simulator.kind = SimulatorKind::External;
  cfg.simulator.external_dir = dir / "nothing_here";
  CHECK(code_of([&] { run_experiment(cfg); }) == ErrorCode::MissingExternalImage);
  const std::string manifest = slurp(dir / "out" / "MANIFEST");
  CHECK(manifest.rfind("status: partial", 0) == 0);
  CHECK(manifest.find("error: ") != std::string::npos);
}

TEST_CASE("directory stages chain to the same scores as the in-memory path") {
  testsupport::TempDir dir("pipeline_stages");
  PipelineConfig cfg = small_config(dir / "unused");
  cfg.n_controls = 4;
  cfg.n_cancers = 3;
  stage_phantom(cfg, dir / "raw");
  stage_preprocess(cfg, dir / "raw", dir / "pre");
  stage_simulate(cfg, dir / "pre", dir / "sim");
  stage_rcdt(cfg, dir / "sim", dir / "rcdt");
  stage_fuse(cfg, dir / "rcdt", dir / "fused");
  stage_train(cfg, dir / "fused", dir / "models");
  stage_score(cfg, dir / "fused", dir / "models", dir / "scores");
  const ScoreTable t = read_score_table(dir / "scores" / "score_table.csv");
  CHECK(t.size() == 7);
  const EvaluationReport ev = stage_evaluate(dir / "scores" / "score_table.csv", dir / "eval");
  const EvaluationReport cmp = stage_compare(dir / "scores" / "score_table.csv", dir / "cmp");
  CHECK(ev.roc[0].auc == cmp.roc[0].auc);
  for (const char* d : {"raw", "pre", "sim", "rcdt", "fused", "models", "scores", "eval", "cmp"})
    CHECK_MESSAGE(slurp(dir / d / "MANIFEST").rfind("status: complete", 0) == 0, d);
  CHECK(fs::exists(dir / "eval" / "roc_fused.csv"));
  CHECK(fs::exists(dir / "cmp" / "comparison.txt"));

  // Stage images match the in-memory pipeline up to 16-bit storage.
  const auto rows = read_manifest(dir / "raw" / "manifest.csv");
  const CaseImages img = load_case_images(rows[5], dir / "raw");
  const ViewProducts p = process_view(img, View::Mlo, cfg);
  const GrayImage staged = load_image(dir / "rcdt" / rcdt_file_name(rows[5].case_id, View::Mlo, Arm::Simulated));
  CHECK(max_abs_diff(staged, p.rcdt_sim) < 0.05);
}
