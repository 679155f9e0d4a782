#include "occult/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "occult/error.hpp"

namespace occult {

namespace {

constexpr double kZ95 = 1.959963984540054;

// 1-based ranks with ties sharing their average rank.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

void split_classes(std::span<const double> scores, std::span<const int> labels,
                   std::vector<double>& pos, std::vector<double>& neg) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(ErrorCode::Numerical, "non-finite score");
    (labels[i] != 0 ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) fail(ErrorCode::SingleClass, "both classes must be present");
}

double sample_covariance(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(n - 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

DelongComponents delong_components(std::span<const double> scores, std::span<const int> labels) {
  std::vector<double> pos, neg;
  split_classes(scores, labels, pos, neg);
  const auto m = static_cast<double>(pos.size());
  const auto n = static_cast<double>(neg.size());
  std::vector<double> all(pos);
  all.insert(all.end(), neg.begin(), neg.end());
  const auto r_all = midranks(all);
  const auto r_pos = midranks(pos);
  const auto r_neg = midranks(neg);

  DelongComponents c;
  c.positive.resize(pos.size());
  c.negative.resize(neg.size());
  for (std::size_t i = 0; i < pos.size(); ++i) c.positive[i] = (r_all[i] - r_pos[i]) / n;
  for (std::size_t j = 0; j < neg.size(); ++j) {
    c.negative[j] = 1.0 - (r_all[pos.size() + j] - r_neg[j]) / m;
  }
  c.auc = std::accumulate(c.positive.begin(), c.positive.end(), 0.0) / m;
  return c;
}

double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
  return delong_components(scores, labels).auc;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const DelongComponents c = delong_components(scores, labels);
  const auto m = static_cast<double>(c.positive.size());
  const auto n = static_cast<double>(c.negative.size());
  RocResult r;
  r.auc = c.auc;
  r.variance = sample_covariance(c.positive, c.positive) / m +
               sample_covariance(c.negative, c.negative) / n;
  const double sd = std::sqrt(std::max(0.0, r.variance));
  r.ci_lo = std::clamp(r.auc - kZ95 * sd, 0.0, 1.0);
  r.ci_hi = std::clamp(r.auc + kZ95 * sd, 0.0, 1.0);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.curve.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] != 0 ? tp : fp) += 1.0;
      ++i;
    }
    r.curve.push_back({fp / n, tp / m});
  }
  return r;
}

DelongComparison delong_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                std::span<const int> labels) {
  if (scores_a.size() != scores_b.size() || scores_a.size() != labels.size()) {
    fail(ErrorCode::LengthMismatch, "delong_compare: paired inputs differ in length");
  }
  const DelongComponents a = delong_components(scores_a, labels);
  const DelongComponents b = delong_components(scores_b, labels);
  const auto m = static_cast<double>(a.positive.size());
  const auto n = static_cast<double>(a.negative.size());
  const double s10 = sample_covariance(a.positive, a.positive) + sample_covariance(b.positive, b.positive) -
                     2.0 * sample_covariance(a.positive, b.positive);
  const double s01 = sample_covariance(a.negative, a.negative) + sample_covariance(b.negative, b.negative) -
                     2.0 * sample_covariance(a.negative, b.negative);
  DelongComparison out;
  out.auc_a = a.auc;
  out.auc_b = b.auc;
  out.diff = a.auc - b.auc;
  out.variance = std::max(0.0, s10 / m + s01 / n);
  const double sd = std::sqrt(out.variance);
  out.ci_lo = out.diff - kZ95 * sd;
  out.ci_hi = out.diff + kZ95 * sd;
  if (sd > 0.0) {
    out.z = out.diff / sd;
    out.p_value = std::clamp(std::erfc(std::abs(out.z) / std::sqrt(2.0)), 0.0, 1.0);
  } else {
    out.z = 0.0;
    out.p_value = out.diff == 0.0 ? 1.0 : 0.0;
  }
  return out;
}

Similarity similarity(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::GridMismatch, "similarity: image sizes differ");
  }
  if (a.empty()) fail(ErrorCode::EmptyInput, "similarity: empty images");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  const auto n = static_cast<double>(pa.size());
  const double ma = mean(a);
  const double mb = mean(b);
  double se = 0.0, sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    se += d * d;
    const double da = pa[i] - ma;
    const double db = pb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(pa) || constant(pb) || !(saa > 0.0) || !(sbb > 0.0)) {
    fail(ErrorCode::ZeroVariance, "similarity: correlation undefined for a constant image");
  }
  return {se / n, std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0)};
}

double median(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "median of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double midpoint_threshold(std::span<const double> positive_scores,
                          std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    fail(ErrorCode::EmptyInput, "midpoint_threshold: both score sets must be nonempty");
  }
  return 0.5 * (median(positive_scores) + median(negative_scores));
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "case_id,label,score_real,score_sim,score_fused\n";
  out << std::setprecision(17);
  for (const auto& r : table) {
    out << r.case_id << ',' << (r.positive ? "positive" : "negative") << ',' << r.score_real << ','
        << r.score_sim << ',' << r.score_fused << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open score table " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::UnsupportedFormat, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "case_id,label,score_real,score_sim,score_fused") {
    fail(ErrorCode::UnsupportedFormat, path.string() + ": unexpected header '" + line + "'");
  }
  ScoreTable table;
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 5) fail(ErrorCode::UnsupportedFormat, where + ": expected 5 columns");
    ScoreRow r;
    r.case_id = cells[0];
    if (!seen.insert(r.case_id).second) fail(ErrorCode::UnsupportedFormat, where + ": duplicate case_id");
    if (cells[1] == "positive") {
      r.positive = true;
    } else if (cells[1] != "negative") {
      fail(ErrorCode::UnsupportedFormat, where + ": label must be positive or negative");
    }
    double* dst[3] = {&r.score_real, &r.score_sim, &r.score_fused};
    for (int k = 0; k < 3; ++k) {
      try {
        std::size_t used = 0;
        *dst[k] = std::stod(cells[static_cast<std::size_t>(2 + k)], &used);
        if (used != cells[static_cast<std::size_t>(2 + k)].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(ErrorCode::UnsupportedFormat, where + ": bad score value");
      }
      if (!std::isfinite(*dst[k])) fail(ErrorCode::Numerical, where + ": non-finite score");
      if (!(*dst[k] >= 0.0 && *dst[k] <= 1.0)) {
        fail(ErrorCode::UnsupportedFormat, where + ": score outside [0, 1]");
      }
    }
    table.push_back(std::move(r));
  }
  return table;
}

void write_roc_curve(const RocResult& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "fpr,tpr\n" << std::setprecision(17);
  for (const auto& p : roc.curve) out << p.fpr << ',' << p.tpr << '\n';
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.push_back('0');
  }
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string format_auc(const RocResult& roc) {
  return "AUC " + format_metric(roc.auc) + ", 95% CI [" + format_metric(roc.ci_lo) + ", " +
         format_metric(roc.ci_hi) + "]";
}

std::string format_comparison(const DelongComparison& cmp) {
  char p[32];
  std::snprintf(p, sizeof p, "%.4f", cmp.p_value);
  return format_metric(cmp.diff) + " with a 95% CI of [" + format_metric(cmp.ci_lo) + ", " +
         format_metric(cmp.ci_hi) + "], p = " + p;
}

}  // namespace occult
