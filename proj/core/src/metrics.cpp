#include "sage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json_util.hpp"
#include "sage/errors.hpp"
#include "sage/util.hpp"

namespace sage {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    raise(ErrorCode::LengthMismatch,
          "list lengths differ: " + std::to_string(a) + " vs " +
              std::to_string(b));
  }
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

// Continued fraction for the regularized incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
               a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels) {
  check_lengths(scores.size(), labels.size());
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    raise(ErrorCode::SingleClass, "auroc needs both classes present");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks across tie groups make each tied (pos, neg) pair count 0.5.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] != 0) pos_rank_sum += avg_rank;
    }
    i = j;
  }

  const double u = pos_rank_sum -
                   static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores.size(), labels.size());
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0 ? 1 : 0;
  if (pos == 0) {
    raise(ErrorCode::NoPositives, "aupr needs at least one positive");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  // Average precision: sum precision at each hit, divided by positives.
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[idx[k]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(pos);
}

DeltaPllrResult delta_pllr(const std::map<std::string, double>& before,
                           const std::map<std::string, double>& after,
                           const std::map<std::string, int>& labels) {
  auto same_ids = [&](const auto& m) {
    if (m.size() != before.size()) return false;
    for (const auto& [id, v] : before) {
      (void)v;
      if (m.find(id) == m.end()) return false;
    }
    return true;
  };
  if (!same_ids(after) || !same_ids(labels)) {
    raise(ErrorCode::IdMismatch,
          "before/after/label maps must share one id set");
  }

  DeltaPllrResult out;
  for (const auto& [id, b] : before) {
    const double delta = after.at(id) - b;
    if (labels.at(id) == 0) {
      out.benign.push_back(delta);
    } else {
      out.path.push_back(delta);
    }
  }
  out.benign_mean = mean_of(out.benign);
  out.path_mean = mean_of(out.path);
  return out;
}

TTestResult paired_t_test(const std::vector<double>& before,
                          const std::vector<double>& after) {
  check_lengths(before.size(), after.size());
  const std::size_t n = before.size();
  if (n < 2) {
    raise(ErrorCode::TooFewSamples,
          "paired t-test needs at least 2 pairs, got " + std::to_string(n));
  }

  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) diffs[i] = after[i] - before[i];
  const double m = mean_of(diffs);
  double ss = 0.0;
  for (double d : diffs) ss += (d - m) * (d - m);

  TTestResult r;
  if (ss == 0.0) {
    r.degenerate = true;
    if (m == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = m > 0.0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }

  const double var = ss / static_cast<double>(n - 1);
  const double se = std::sqrt(var / static_cast<double>(n));
  r.t = m / se;
  const double df = static_cast<double>(n - 1);
  r.p = incomplete_beta(df / 2.0, 0.5, df / (df + r.t * r.t));
  return r;
}

std::string metric_record_to_json(const MetricRecord& record) {
  return detail::metric_record_json(record).dump();
}

std::string metric_records_to_csv(const std::vector<MetricRecord>& records) {
  std::string csv =
      "step,auroc,aupr,benign_mean_lambda,path_mean_lambda,"
      "delta_benign_mean,delta_path_mean,t_stat,p_value\n";
  for (const auto& r : records) {
    csv += std::to_string(r.step);
    for (double v : {r.auroc, r.aupr, r.benign_mean_lambda, r.path_mean_lambda,
                     mean_of(r.delta_pllr_benign), mean_of(r.delta_pllr_path),
                     r.t_stat, r.p_value}) {
      csv += ',';
      csv += format_full(v);
    }
    csv += '\n';
  }
  return csv;
}

}  // namespace sage
