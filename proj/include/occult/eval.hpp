#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occult/image.hpp"

namespace occult {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  double auc = 0.0;
  double variance = 0.0;  // DeLong
  double ci_lo = 0.0;     // auc -/+ 1.96 sd, clamped to [0, 1]
  double ci_hi = 0.0;
  std::vector<RocPoint> curve;  // (0,0) ... (1,1), one vertex per distinct score
};

// DeLong structural components: for each positive, the fraction of negatives
// it outscores (ties 1/2); for each negative, the fraction of positives that
// outscore it.
struct DelongComponents {
  std::vector<double> positive;  // V10
  std::vector<double> negative;  // V01
  double auc = 0.0;
};

// labels: nonzero = positive. Throws SingleClass, LengthMismatch.
DelongComponents delong_components(std::span<const double> scores, std::span<const int> labels);

double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels);

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

struct DelongComparison {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double diff = 0.0;  // auc_a - auc_b
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided
};

DelongComparison delong_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                std::span<const int> labels);

struct Similarity {
  double mse = 0.0;
  double correlation = 0.0;
};

// Throws GridMismatch, ZeroVariance.
Similarity similarity(const GrayImage& a, const GrayImage& b);

double median(std::span<const double> values);

// (median(pos) + median(neg)) / 2. Throws EmptyInput.
double midpoint_threshold(std::span<const double> positive_scores,
                          std::span<const double> negative_scores);

double normal_cdf(double z);

struct ScoreRow {
  std::string case_id;
  bool positive = false;
  double score_real = 0.0;
  double score_sim = 0.0;
  double score_fused = 0.0;
};

using ScoreTable = std::vector<ScoreRow>;

// Header: case_id,label,score_real,score_sim,score_fused; label is
// "positive" or "negative".
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_table(const std::filesystem::path& path);

void write_roc_curve(const RocResult& roc, const std::filesystem::path& path);

// "0.067" / "0.12": three decimals with trailing zeros trimmed.
std::string format_metric(double v);
// e.g. "AUC 0.77, 95% CI [0.71, 0.83]"
std::string format_auc(const RocResult& roc);
// e.g. "0.067 with a 95% CI of [0.011, 0.12], p = 0.0150"
std::string format_comparison(const DelongComparison& cmp);

}  // namespace occult
