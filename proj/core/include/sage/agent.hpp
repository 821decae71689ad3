#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sage/attack.hpp"
#include "sage/checkpoint.hpp"
#include "sage/metrics.hpp"
#include "sage/model.hpp"
#include "sage/scoring.hpp"
#include "sage/seqdata.hpp"

namespace sage {

enum class RiskTier { kHigh, kMedium, kLow };

std::string risk_tier_name(RiskTier tier);
RiskTier risk_tier_from_name(const std::string& name);

struct RiskThresholds {
  double high_below = 0.6;
  double medium_below = 0.7;

  void validate() const;
};

struct RiskAssessment {
  int step = 0;
  RiskTier tier = RiskTier::kLow;
  std::string rationale;
  MetricRecord metric_ref;
};

/// Where a probe comes from: a persisted soft-prompt container, or a fresh
/// Xavier init of length n. The name is free-form metadata carried verbatim
/// into reports.
struct ProbeSpec {
  std::string name;
  std::string prompt_path;
  int n = 10;
};

struct AuditSchedule {
  int start = 50;
  int end = 2000;
  int interval = 50;
};

/// Full audit recipe. The top-level seed drives every stochastic stage
/// (split, training, probe init, attack) through derived sub-seeds; the seed
/// fields inside the nested configs are ignored here so one value pins the
/// whole run.
struct AuditConfig {
  std::string dataset_path;
  std::vector<std::string> checkpoint_paths;  // empty: train from scratch
  ModelConfig model;                          // used when training here
  TrainConfig train;
  AttackConfig attack;  // probe optimization protocol
  std::vector<ProbeSpec> probes;
  AuditSchedule schedule;
  int injection_step = 750;
  RiskThresholds thresholds;
  std::string narrative = "template";  // template | llm
  std::string narrative_endpoint;      // llm only
  std::string narrative_model;         // llm only
  std::string report_format = "markdown";  // markdown | html
  std::string out_dir = "audit_out";
  double test_fraction = 0.2;
  int workers = 1;  // EVALUATE fan-out
  std::uint64_t seed = 0;

  void validate() const;
};

/// OBSERVE output: everything later layers read. Checkpoints sorted by step.
struct AuditContext {
  VariantDataset dataset;
  SplitResult split;
  std::vector<Checkpoint> checkpoints;
  std::vector<SoftPromptF> probes;  // unoptimized
  bool trained_here = false;
  std::vector<LossPoint> training_trajectory;
  AttackTrajectory attack;  // filled by intervene
};

/// One scheduled evaluation. Points at or past the injection step carry the
/// optimized probe.
struct InterventionPoint {
  int step = 0;
  bool prompted = false;
  SoftPromptF probe;
};

struct AuditPoint {
  int step = 0;
  bool prompted = false;
  bool failed = false;
  std::string error;  // set when failed
  MetricRecord metrics;
  RiskAssessment risk;
};

struct AuditRun {
  AuditConfig config;
  std::vector<AuditPoint> points;
  AttackTrajectory trajectory;
  std::int64_t created_at = 0;
  std::uint64_t seed = 0;
};

/// Loads the dataset, splits it, resolves checkpoints (loading files or
/// training from scratch on the train split), and initializes probes.
AuditContext observe(const AuditConfig& cfg);

/// Optimizes the first probe against the injection-step checkpoint on the
/// train split, then lays out one point per scheduled step; earlier points
/// stay unprompted as the pre-injection baseline.
std::vector<InterventionPoint> intervene(AuditContext& ctx,
                                         const AuditConfig& cfg);

/// Scores the test split at the point's checkpoint (greatest step <= the
/// scheduled step): AUROC/AUPR over sigma-hat, per-class lambda means, and
/// before/after deltas against the unprompted baseline of the same
/// checkpoint, with a paired t-test on the benign deltas.
MetricRecord evaluate_point(const AuditContext& ctx,
                            const InterventionPoint& point);

/// Pure tier rule plus the deterministic template rationale.
RiskAssessment reason(const MetricRecord& record, const RiskThresholds& th);

/// The five layers end to end. Persists run.json, the report, the attack
/// trajectory, and plot CSVs into cfg.out_dir. Failures at single EVALUATE
/// points are recorded on the point and excluded from summaries rather than
/// aborting the run.
AuditRun run_audit(const AuditConfig& cfg);

std::string audit_run_to_json(const AuditRun& run);
AuditRun audit_run_from_json(const std::string& text);

/// Config snapshot as JSON (the "config" object of the run document). Note
/// that nested seeds are omitted: the audit seed is the only one that runs
/// use.
std::string audit_config_to_json(const AuditConfig& cfg);

}  // namespace sage
