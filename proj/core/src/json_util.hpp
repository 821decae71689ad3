#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "sage/metrics.hpp"

// Internal JSON plumbing shared by the persistence paths. ordered_json keeps
// fields in insertion order so emitted documents are stable byte-for-byte.
namespace sage::detail {

using ojson = nlohmann::ordered_json;

// JSON has no infinities; non-finite doubles travel as strings.
inline ojson num_or_sentinel(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double num_from(const ojson& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

inline double list_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline ojson metric_record_json(const MetricRecord& r) {
  ojson j;
  j["step"] = r.step;
  j["auroc"] = r.auroc;
  j["aupr"] = r.aupr;
  j["benign_mean_lambda"] = r.benign_mean_lambda;
  j["path_mean_lambda"] = r.path_mean_lambda;
  j["delta_pllr_benign"] = r.delta_pllr_benign;
  j["delta_pllr_path"] = r.delta_pllr_path;
  j["delta_benign_mean"] = list_mean(r.delta_pllr_benign);
  j["delta_path_mean"] = list_mean(r.delta_pllr_path);
  j["t_stat"] = num_or_sentinel(r.t_stat);
  j["p_value"] = r.p_value;
  return j;
}

inline MetricRecord metric_record_from_json(const ojson& j) {
  MetricRecord r;
  r.step = j.at("step").get<int>();
  r.auroc = j.at("auroc").get<double>();
  r.aupr = j.at("aupr").get<double>();
  r.benign_mean_lambda = j.at("benign_mean_lambda").get<double>();
  r.path_mean_lambda = j.at("path_mean_lambda").get<double>();
  r.delta_pllr_benign = j.at("delta_pllr_benign").get<std::vector<double>>();
  r.delta_pllr_path = j.at("delta_pllr_path").get<std::vector<double>>();
  r.t_stat = num_from(j.at("t_stat"));
  r.p_value = j.at("p_value").get<double>();
  return r;
}

}  // namespace sage::detail
