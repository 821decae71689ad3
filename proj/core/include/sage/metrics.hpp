#pragma once

#include <map>
#include <string>
#include <vector>

namespace sage {

/// Everything EVALUATE measures at one audit point. Delta lists hold
/// after-minus-before lambda per record, split by class, in dataset order.
struct MetricRecord {
  int step = 0;
  double auroc = 0.0;
  double aupr = 0.0;
  double benign_mean_lambda = 0.0;
  double path_mean_lambda = 0.0;
  std::vector<double> delta_pllr_benign;
  std::vector<double> delta_pllr_path;
  double t_stat = 0.0;
  double p_value = 1.0;
};

/// Mann-Whitney AUROC: fraction of (positive, negative) pairs ranked
/// correctly, ties worth 0.5. Computed via average ranks; must agree with
/// exhaustive pair counting.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Average precision over the descending-score ranking, ties broken by
/// original index.
double aupr(const std::vector<double>& scores, const std::vector<int>& labels);

struct DeltaPllrResult {
  std::vector<double> benign;  // per-id deltas in sorted-id order
  std::vector<double> path;
  double benign_mean = 0.0;
  double path_mean = 0.0;
};

/// after - before per id, partitioned by label. All three maps must share
/// one id set.
DeltaPllrResult delta_pllr(const std::map<std::string, double>& before,
                           const std::map<std::string, double>& after,
                           const std::map<std::string, int>& labels);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  // Zero-variance differences: with zero mean (t=0, p=1), with nonzero mean
  // (t signed infinity, p=0). Flagged so audits on tiny probes can proceed.
  bool degenerate = false;
};

/// Two-sided paired t-test on (after - before), df = n-1.
TTestResult paired_t_test(const std::vector<double>& before,
                          const std::vector<double>& after);

/// Regularized incomplete beta I_x(a, b); backs the t-distribution CDF.
double incomplete_beta(double a, double b, double x);

std::string metric_record_to_json(const MetricRecord& record);
std::string metric_records_to_csv(const std::vector<MetricRecord>& records);

}  // namespace sage
