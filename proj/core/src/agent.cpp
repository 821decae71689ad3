#include "sage/agent.hpp"

#include <algorithm>
#include <filesystem>
#include <thread>

#include "json_util.hpp"
#include "sage/report.hpp"
#include "sage/rng.hpp"
#include "sage/util.hpp"

namespace fs = std::filesystem;

namespace sage {

namespace {

// Sub-seed slots under the audit seed; one master seed pins the whole run.
enum SeedSlot : std::uint64_t {
  kSplitSeed = 1,
  kModelSeed = 2,
  kTrainSeed = 3,
  kAttackSeed = 4,
  kProbeSeedBase = 16,
};

const Checkpoint& checkpoint_for_step(const AuditContext& ctx, int step) {
  const Checkpoint* best = nullptr;
  for (const Checkpoint& c : ctx.checkpoints) {
    if (c.step <= step && (!best || c.step > best->step)) best = &c;
  }
  if (!best) {
    raise(ErrorCode::MissingArtifact,
          "no checkpoint at or before step " + std::to_string(step));
  }
  return *best;
}

struct LambdaMaps {
  std::map<std::string, double> before;  // unprompted lambda per id
  std::map<std::string, double> after;   // with the point's probe
  std::map<std::string, int> labels;
  std::vector<double> scores;  // sigma-hat of "after", dataset order
  std::vector<int> label_list;
};

LambdaMaps lambda_maps(const AuditContext& ctx, const InterventionPoint& point,
                       const Checkpoint& ck) {
  LambdaMaps m;
  for (const VariantRecord& rec : ctx.split.test.records) {
    const PllrResult base = pllr(ck.state, rec);
    const PllrResult scored =
        point.prompted ? pllr(ck.state, rec, &point.probe) : base;
    m.before[rec.id] = base.lambda;
    m.after[rec.id] = scored.lambda;
    m.labels[rec.id] = rec.label;
    m.scores.push_back(scored.prob);
    m.label_list.push_back(rec.label);
  }
  return m;
}

}  // namespace

std::string risk_tier_name(RiskTier tier) {
  switch (tier) {
    case RiskTier::kHigh:
      return "HIGH";
    case RiskTier::kMedium:
      return "MEDIUM";
    case RiskTier::kLow:
      return "LOW";
  }
  return "LOW";
}

RiskTier risk_tier_from_name(const std::string& name) {
  if (name == "HIGH") return RiskTier::kHigh;
  if (name == "MEDIUM") return RiskTier::kMedium;
  if (name == "LOW") return RiskTier::kLow;
  raise(ErrorCode::ConfigError, "unknown risk tier '" + name + "'");
}

void RiskThresholds::validate() const {
  if (!(0.0 < high_below && high_below < medium_below && medium_below <= 1.0)) {
    raise(ErrorCode::ConfigError,
          "risk thresholds must satisfy 0 < high_below < medium_below <= 1");
  }
}

void AuditConfig::validate() const {
  if (dataset_path.empty()) {
    raise(ErrorCode::ConfigError, "audit needs a dataset path");
  }
  if (probes.empty()) {
    raise(ErrorCode::ConfigError, "audit needs at least one probe spec");
  }
  for (const ProbeSpec& p : probes) {
    if (p.prompt_path.empty() && p.n <= 0) {
      raise(ErrorCode::ConfigError,
            "probe '" + p.name + "' needs a positive length or a prompt path");
    }
  }
  if (schedule.interval <= 0) {
    raise(ErrorCode::ConfigError, "schedule interval must be positive");
  }
  if (schedule.start > schedule.end || schedule.start <= 0) {
    raise(ErrorCode::ConfigError, "schedule must satisfy 0 < start <= end");
  }
  if (injection_step < schedule.start || injection_step > schedule.end) {
    raise(ErrorCode::ConfigError,
          "injection_step " + std::to_string(injection_step) +
              " outside schedule range");
  }
  thresholds.validate();
  if (narrative != "template" && narrative != "llm") {
    raise(ErrorCode::ConfigError,
          "narrative backend must be 'template' or 'llm'");
  }
  if (report_format != "markdown" && report_format != "html") {
    raise(ErrorCode::ConfigError,
          "report format must be 'markdown' or 'html'");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    raise(ErrorCode::ConfigError, "test_fraction must lie in (0, 1)");
  }
  if (workers < 1) {
    raise(ErrorCode::ConfigError, "workers must be at least 1");
  }
  model.validate();
  train.validate();
  attack.validate();
}

AuditContext observe(const AuditConfig& cfg) {
  cfg.validate();

  AuditContext ctx;
  if (!fs::exists(cfg.dataset_path)) {
    raise(ErrorCode::MissingArtifact,
          "dataset not found: " + cfg.dataset_path);
  }
  ctx.dataset = load_variant_dataset(cfg.dataset_path);
  ctx.split = split_dataset(ctx.dataset, cfg.test_fraction,
                            sub_seed(cfg.seed, kSplitSeed));

  if (cfg.checkpoint_paths.empty()) {
    ModelConfig mc = cfg.model;
    mc.seed = sub_seed(cfg.seed, kModelSeed);
    TrainConfig tc = cfg.train;
    tc.seed = sub_seed(cfg.seed, kTrainSeed);
    TrainResult trained =
        train_classifier(init_model<float>(mc), ctx.split.train, tc);
    ctx.checkpoints = std::move(trained.checkpoints);
    ctx.training_trajectory = std::move(trained.trajectory);
    ctx.trained_here = true;
  } else {
    for (const std::string& path : cfg.checkpoint_paths) {
      if (!fs::exists(path)) {
        raise(ErrorCode::MissingArtifact, "checkpoint not found: " + path);
      }
      ctx.checkpoints.push_back(load_checkpoint(path));
    }
  }
  std::stable_sort(ctx.checkpoints.begin(), ctx.checkpoints.end(),
                   [](const Checkpoint& a, const Checkpoint& b) {
                     return a.step < b.step;
                   });

  const int d = ctx.checkpoints.front().state.config.embed_dim;
  for (std::size_t i = 0; i < cfg.probes.size(); ++i) {
    const ProbeSpec& spec = cfg.probes[i];
    SoftPromptF probe;
    if (!spec.prompt_path.empty()) {
      if (!fs::exists(spec.prompt_path)) {
        raise(ErrorCode::MissingArtifact,
              "probe prompt not found: " + spec.prompt_path);
      }
      probe = load_soft_prompt(spec.prompt_path);
      if (probe.dim() != d) {
        raise(ErrorCode::DimensionMismatch,
              "probe '" + spec.name + "' dim " + std::to_string(probe.dim()) +
                  " != model embed_dim " + std::to_string(d));
      }
    } else {
      probe = init_soft_prompt(spec.n, d,
                               sub_seed(cfg.seed, kProbeSeedBase + i));
    }
    probe.name = spec.name;
    ctx.probes.push_back(std::move(probe));
  }
  return ctx;
}

std::vector<InterventionPoint> intervene(AuditContext& ctx,
                                         const AuditConfig& cfg) {
  const Checkpoint& injection_ck = checkpoint_for_step(ctx, cfg.injection_step);

  AttackConfig ac = cfg.attack;
  ac.seed = sub_seed(cfg.seed, kAttackSeed);
  ctx.attack =
      run_targeted_attack(injection_ck.state, ctx.split.train, ac,
                          &ctx.probes.at(0));

  std::vector<InterventionPoint> points;
  for (int s = cfg.schedule.start; s <= cfg.schedule.end;
       s += cfg.schedule.interval) {
    InterventionPoint p;
    p.step = s;
    p.prompted = s >= cfg.injection_step;
    if (p.prompted) p.probe = ctx.attack.prompt;
    points.push_back(std::move(p));
  }
  return points;
}

MetricRecord evaluate_point(const AuditContext& ctx,
                            const InterventionPoint& point) {
  if (ctx.split.test.records.empty()) {
    raise(ErrorCode::EmptyDataset, "test split is empty");
  }
  const Checkpoint& ck = checkpoint_for_step(ctx, point.step);
  const LambdaMaps m = lambda_maps(ctx, point, ck);

  MetricRecord rec;
  rec.step = point.step;
  rec.auroc = auroc(m.scores, m.label_list);
  rec.aupr = aupr(m.scores, m.label_list);

  double benign_sum = 0.0, path_sum = 0.0;
  int benign_n = 0, path_n = 0;
  for (const auto& [id, lambda] : m.after) {
    if (m.labels.at(id) == 0) {
      benign_sum += lambda;
      ++benign_n;
    } else {
      path_sum += lambda;
      ++path_n;
    }
  }
  rec.benign_mean_lambda = benign_n ? benign_sum / benign_n : 0.0;
  rec.path_mean_lambda = path_n ? path_sum / path_n : 0.0;

  const DeltaPllrResult deltas = delta_pllr(m.before, m.after, m.labels);
  rec.delta_pllr_benign = deltas.benign;
  rec.delta_pllr_path = deltas.path;

  std::vector<double> benign_before, benign_after;
  for (const auto& [id, lambda] : m.before) {
    if (m.labels.at(id) != 0) continue;
    benign_before.push_back(lambda);
    benign_after.push_back(m.after.at(id));
  }
  const TTestResult tt = paired_t_test(benign_before, benign_after);
  rec.t_stat = tt.t;
  rec.p_value = tt.p;
  return rec;
}

RiskAssessment reason(const MetricRecord& record, const RiskThresholds& th) {
  th.validate();
  RiskAssessment out;
  out.step = record.step;
  out.metric_ref = record;
  if (record.auroc < th.high_below) {
    out.tier = RiskTier::kHigh;
  } else if (record.auroc < th.medium_below) {
    out.tier = RiskTier::kMedium;
  } else {
    out.tier = RiskTier::kLow;
  }
  out.rationale = template_narrative(record, out.tier);
  return out;
}

AuditRun run_audit(const AuditConfig& cfg) {
  AuditRun run;
  run.config = cfg;
  run.seed = cfg.seed;

  AuditContext ctx = observe(cfg);
  const std::vector<InterventionPoint> points = intervene(ctx, cfg);
  run.trajectory = ctx.attack;

  run.points.resize(points.size());
  auto evaluate_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      AuditPoint& ap = run.points[i];
      ap.step = points[i].step;
      ap.prompted = points[i].prompted;
      try {
        ap.metrics = evaluate_point(ctx, points[i]);
      } catch (const std::exception& e) {
        ap.failed = true;
        ap.error = e.what();
      }
    }
  };

  const std::size_t n = points.size();
  const std::size_t nworkers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), n);
  if (nworkers <= 1) {
    evaluate_range(0, n);
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (n + nworkers - 1) / nworkers;
    for (std::size_t w = 0; w < nworkers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      threads.emplace_back(evaluate_range, lo, hi);
    }
    for (auto& t : threads) t.join();
  }

  NarrativeBackend backend;
  backend.kind = cfg.narrative == "llm" ? NarrativeKind::kLlm
                                        : NarrativeKind::kTemplate;
  backend.endpoint = cfg.narrative_endpoint;
  backend.model_name = cfg.narrative_model;
  for (AuditPoint& ap : run.points) {
    if (ap.failed) continue;
    ap.risk = reason(ap.metrics, cfg.thresholds);
    ap.risk.rationale = narrative(ap.metrics, ap.risk.tier, backend);
  }
  run.created_at = now_unix();

  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  write_file((out / "run.json").string(), audit_run_to_json(run));
  write_file((out / "attack_trajectory.csv").string(),
             attack_trajectory_to_csv(run.trajectory));

  std::vector<MetricRecord> ok_records;
  for (const AuditPoint& ap : run.points) {
    if (!ap.failed) ok_records.push_back(ap.metrics);
  }
  write_file((out / "metrics.csv").string(), metric_records_to_csv(ok_records));

  // Plot data comes from the last prompted point that evaluated cleanly:
  // the fully trained checkpoint, with and without the optimized probe.
  for (std::size_t i = points.size(); i-- > 0;) {
    if (!points[i].prompted || run.points[i].failed) continue;
    const Checkpoint& ck = checkpoint_for_step(ctx, points[i].step);
    const LambdaMaps m = lambda_maps(ctx, points[i], ck);
    export_plot_data(run, m.before, m.after, m.labels);
    break;
  }

  const ReportDocument doc = render_report(run, cfg.report_format);
  write_file((out / "report.md").string(), doc.markdown);
  if (!doc.html.empty()) {
    write_file((out / "report.html").string(), doc.html);
  }
  return run;
}

namespace {

using detail::ojson;

ojson config_json(const AuditConfig& cfg) {
  ojson j;
  j["dataset"] = cfg.dataset_path;
  j["checkpoints"] = cfg.checkpoint_paths;
  j["model"] = {{"vocab_size", cfg.model.vocab_size},
                {"embed_dim", cfg.model.embed_dim},
                {"num_layers", cfg.model.num_layers},
                {"num_heads", cfg.model.num_heads},
                {"ff_dim", cfg.model.ff_dim},
                {"max_len", cfg.model.max_len}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  j["attack"] = {{"n", cfg.attack.n},
                 {"learning_rate", cfg.attack.learning_rate},
                 {"batch_size", cfg.attack.batch_size},
                 {"epochs", cfg.attack.epochs},
                 {"mode", attack_mode_name(cfg.attack.mode)},
                 {"eval_every", cfg.attack.eval_every}};
  ojson probes = ojson::array();
  for (const ProbeSpec& p : cfg.probes) {
    probes.push_back(
        {{"name", p.name}, {"prompt_path", p.prompt_path}, {"n", p.n}});
  }
  j["probes"] = probes;
  j["schedule"] = {{"start", cfg.schedule.start},
                   {"end", cfg.schedule.end},
                   {"interval", cfg.schedule.interval}};
  j["injection_step"] = cfg.injection_step;
  j["thresholds"] = {{"high_below", cfg.thresholds.high_below},
                     {"medium_below", cfg.thresholds.medium_below}};
  j["narrative"] = cfg.narrative;
  j["narrative_endpoint"] = cfg.narrative_endpoint;
  j["narrative_model"] = cfg.narrative_model;
  j["report_format"] = cfg.report_format;
  j["out_dir"] = cfg.out_dir;
  j["test_fraction"] = cfg.test_fraction;
  j["workers"] = cfg.workers;
  j["seed"] = cfg.seed;
  return j;
}

AuditConfig config_from_json(const ojson& j) {
  AuditConfig cfg;
  cfg.dataset_path = j.at("dataset").get<std::string>();
  cfg.checkpoint_paths = j.at("checkpoints").get<std::vector<std::string>>();
  const auto& m = j.at("model");
  cfg.model.vocab_size = m.at("vocab_size").get<int>();
  cfg.model.embed_dim = m.at("embed_dim").get<int>();
  cfg.model.num_layers = m.at("num_layers").get<int>();
  cfg.model.num_heads = m.at("num_heads").get<int>();
  cfg.model.ff_dim = m.at("ff_dim").get<int>();
  cfg.model.max_len = m.at("max_len").get<int>();
  const auto& t = j.at("train");
  cfg.train.learning_rate = t.at("learning_rate").get<double>();
  cfg.train.batch_size = t.at("batch_size").get<int>();
  cfg.train.epochs = t.at("epochs").get<int>();
  cfg.train.checkpoint_every = t.at("checkpoint_every").get<int>();
  const auto& a = j.at("attack");
  cfg.attack.n = a.at("n").get<int>();
  cfg.attack.learning_rate = a.at("learning_rate").get<double>();
  cfg.attack.batch_size = a.at("batch_size").get<int>();
  cfg.attack.epochs = a.at("epochs").get<int>();
  cfg.attack.mode = attack_mode_from_name(a.at("mode").get<std::string>());
  cfg.attack.eval_every = a.at("eval_every").get<int>();
  for (const auto& p : j.at("probes")) {
    cfg.probes.push_back({p.at("name").get<std::string>(),
                          p.at("prompt_path").get<std::string>(),
                          p.at("n").get<int>()});
  }
  const auto& s = j.at("schedule");
  cfg.schedule = {s.at("start").get<int>(), s.at("end").get<int>(),
                  s.at("interval").get<int>()};
  cfg.injection_step = j.at("injection_step").get<int>();
  const auto& th = j.at("thresholds");
  cfg.thresholds = {th.at("high_below").get<double>(),
                    th.at("medium_below").get<double>()};
  cfg.narrative = j.at("narrative").get<std::string>();
  cfg.narrative_endpoint = j.at("narrative_endpoint").get<std::string>();
  cfg.narrative_model = j.at("narrative_model").get<std::string>();
  cfg.report_format = j.at("report_format").get<std::string>();
  cfg.out_dir = j.at("out_dir").get<std::string>();
  cfg.test_fraction = j.at("test_fraction").get<double>();
  cfg.workers = j.at("workers").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

std::string audit_config_to_json(const AuditConfig& cfg) {
  return config_json(cfg).dump();
}

std::string audit_run_to_json(const AuditRun& run) {
  ojson j;
  j["config"] = config_json(run.config);
  ojson points = ojson::array();
  for (const AuditPoint& p : run.points) {
    ojson pj;
    pj["step"] = p.step;
    pj["prompted"] = p.prompted;
    if (p.failed) {
      pj["failed"] = true;
      pj["error"] = p.error;
    } else {
      pj["metrics"] = detail::metric_record_json(p.metrics);
      pj["risk"] = {{"tier", risk_tier_name(p.risk.tier)},
                    {"rationale", p.risk.rationale}};
    }
    points.push_back(std::move(pj));
  }
  j["points"] = points;
  j["created_at"] = run.created_at;
  j["seed"] = run.seed;
  return j.dump(2) + "\n";
}

AuditRun audit_run_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError,
          std::string("unreadable audit run JSON: ") + e.what());
  }
  AuditRun run;
  try {
    run.config = config_from_json(j.at("config"));
    for (const auto& pj : j.at("points")) {
      AuditPoint p;
      p.step = pj.at("step").get<int>();
      p.prompted = pj.at("prompted").get<bool>();
      if (pj.value("failed", false)) {
        p.failed = true;
        p.error = pj.value("error", std::string{});
      } else {
        p.metrics = detail::metric_record_from_json(pj.at("metrics"));
        p.risk.step = p.step;
        p.risk.metric_ref = p.metrics;
        p.risk.tier =
            risk_tier_from_name(pj.at("risk").at("tier").get<std::string>());
        p.risk.rationale = pj.at("risk").at("rationale").get<std::string>();
      }
      run.points.push_back(std::move(p));
    }
    run.created_at = j.at("created_at").get<std::int64_t>();
    run.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError,
          std::string("audit run JSON missing fields: ") + e.what());
  }
  return run;
}

}  // namespace sage
