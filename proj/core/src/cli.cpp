#include "sage/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "json_util.hpp"
#include "sage/agent.hpp"
#include "sage/attack.hpp"
#include "sage/checkpoint.hpp"
#include "sage/errors.hpp"
#include "sage/metrics.hpp"
#include "sage/model.hpp"
#include "sage/report.hpp"
#include "sage/rng.hpp"
#include "sage/scoring.hpp"
#include "sage/seqdata.hpp"
#include "sage/synthbench.hpp"
#include "sage/util.hpp"
#include "sage/version.hpp"

namespace sage {
namespace {

namespace fs = std::filesystem;
using detail::ojson;

std::string trim(const std::string& s) {
  const char* ws = " \t";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Flat view over a parsed config file with typed, validating accessors.
class FileConfig {
 public:
  FileConfig() = default;
  explicit FileConfig(std::map<std::string, std::string> kv)
      : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  int integer(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return static_cast<int>(v);
    } catch (const std::exception&) {
      raise(ErrorCode::ConfigError,
            "config key " + key + " is not an integer: '" + it->second + "'");
    }
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      raise(ErrorCode::ConfigError, "config key " + key +
                                        " is not an unsigned integer: '" +
                                        it->second + "'");
    }
  }

  double real(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      raise(ErrorCode::ConfigError,
            "config key " + key + " is not a number: '" + it->second + "'");
    }
  }

 private:
  std::map<std::string, std::string> kv_;
};

std::uint64_t resolve_seed(const FileConfig& fc,
                           const std::optional<std::uint64_t>& flag) {
  return flag ? *flag : fc.u64("seed", 0);
}

/// Writes `<artifact>.meta.json` next to the artifact so a run can be
/// reproduced from the seed plus a digest of the effective config.
void write_meta(const fs::path& artifact, std::uint64_t seed,
                const std::string& config_dump) {
  ojson meta;
  meta["artifact"] = artifact.filename().string();
  meta["seed"] = seed;
  meta["config_digest"] =
      hex64(fnv1a64(config_dump.data(), config_dump.size()));
  meta["version"] = kVersion;
  write_file(artifact.string() + ".meta.json", meta.dump(2) + "\n");
}

ModelConfig model_from(const FileConfig& fc) {
  ModelConfig mc;
  mc.vocab_size = fc.integer("model.vocab_size", mc.vocab_size);
  mc.embed_dim = fc.integer("model.embed_dim", mc.embed_dim);
  mc.num_layers = fc.integer("model.num_layers", mc.num_layers);
  mc.num_heads = fc.integer("model.num_heads", mc.num_heads);
  mc.ff_dim = fc.integer("model.ff_dim", mc.ff_dim);
  mc.max_len = fc.integer("model.max_len", mc.max_len);
  return mc;
}

TrainConfig train_from(const FileConfig& fc) {
  TrainConfig tc;
  tc.learning_rate = fc.real("train.learning_rate", tc.learning_rate);
  tc.batch_size = fc.integer("train.batch_size", tc.batch_size);
  tc.epochs = fc.integer("train.epochs", tc.epochs);
  tc.checkpoint_every = fc.integer("train.checkpoint_every", tc.checkpoint_every);
  return tc;
}

AttackConfig attack_from(const FileConfig& fc) {
  AttackConfig ac;
  ac.n = fc.integer("attack.n", ac.n);
  ac.learning_rate = fc.real("attack.learning_rate", ac.learning_rate);
  ac.batch_size = fc.integer("attack.batch_size", ac.batch_size);
  ac.epochs = fc.integer("attack.epochs", ac.epochs);
  if (fc.has("attack.mode")) {
    ac.mode = attack_mode_from_name(fc.str("attack.mode", ""));
  }
  ac.eval_every = fc.integer("attack.eval_every", ac.eval_every);
  return ac;
}

AuditSchedule parse_schedule(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ':')) parts.push_back(part);
  auto field = [&](const std::string& p) -> int {
    try {
      std::size_t pos = 0;
      int v = std::stoi(p, &pos);
      if (pos != p.size()) throw std::invalid_argument(p);
      return v;
    } catch (const std::exception&) {
      raise(ErrorCode::UsageError,
            "schedule must be start:end:interval, got '" + text + "'");
    }
  };
  if (parts.size() != 3) {
    raise(ErrorCode::UsageError,
          "schedule must be start:end:interval, got '" + text + "'");
  }
  return {field(parts[0]), field(parts[1]), field(parts[2])};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void parse_scores_csv(const std::string& text, std::vector<double>* scores,
                      std::vector<int>* labels) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorCode::ParseError, "scores CSV is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "score,label") {
    raise(ErrorCode::ParseError,
          "scores CSV must start with header 'score,label', got '" + line +
              "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "scores CSV line " + std::to_string(line_no);
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      raise(ErrorCode::ParseError, where + ": expected 'score,label'");
    }
    const std::string score_text = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    try {
      std::size_t pos = 0;
      double score = std::stod(score_text, &pos);
      if (pos != score_text.size()) throw std::invalid_argument(score_text);
      scores->push_back(score);
    } catch (const std::exception&) {
      raise(ErrorCode::ParseError,
            where + ": bad score '" + score_text + "'");
    }
    if (label_text != "0" && label_text != "1") {
      raise(ErrorCode::ParseError,
            where + ": label must be 0 or 1, got '" + label_text + "'");
    }
    labels->push_back(label_text == "1" ? 1 : 0);
  }
}

int cmd_synth(const FileConfig& fc,
              const std::optional<std::uint64_t>& seed_flag,
              const std::optional<std::string>& out_flag) {
  SynthConfig sc;
  sc.num_records = fc.integer("synth.num_records", sc.num_records);
  sc.seq_len = fc.integer("synth.seq_len", sc.seq_len);
  sc.pathogenic_fraction =
      fc.real("synth.pathogenic_fraction", sc.pathogenic_fraction);
  sc.motif = fc.str("synth.motif", sc.motif);
  sc.seed = resolve_seed(fc, seed_flag);
  const std::string out = out_flag ? *out_flag : fc.str("synth.out", "synth.csv");

  VariantDataset ds = generate(sc);
  const fs::path parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  save_variant_dataset(ds, out);

  ojson cj{{"num_records", sc.num_records},
           {"seq_len", sc.seq_len},
           {"pathogenic_fraction", sc.pathogenic_fraction},
           {"motif", sc.motif}};
  write_meta(out, sc.seed, cj.dump());
  std::cout << out << "\n";
  return 0;
}

int cmd_train(const FileConfig& fc,
              const std::optional<std::uint64_t>& seed_flag,
              const std::optional<std::string>& out_flag,
              const std::optional<std::string>& dataset_flag) {
  const std::string dataset = dataset_flag ? *dataset_flag : fc.str("dataset", "");
  if (dataset.empty()) {
    raise(ErrorCode::UsageError,
          "train needs --dataset or a dataset key in the config");
  }
  const std::string out = out_flag ? *out_flag : fc.str("train.out", "train_out");
  const std::uint64_t seed = resolve_seed(fc, seed_flag);

  ModelConfig mc = model_from(fc);
  TrainConfig tc = train_from(fc);
  // Same derivation slots the audit uses, so training standalone with an
  // audit's seed reproduces its from-scratch checkpoints.
  mc.seed = sub_seed(seed, 2);
  tc.seed = sub_seed(seed, 3);

  VariantDataset ds = load_variant_dataset(dataset);
  TrainResult result = train_classifier(init_model<float>(mc), ds, tc);

  fs::create_directories(out);
  ojson cj{{"dataset", dataset},
           {"model",
            {{"vocab_size", mc.vocab_size},
             {"embed_dim", mc.embed_dim},
             {"num_layers", mc.num_layers},
             {"num_heads", mc.num_heads},
             {"ff_dim", mc.ff_dim},
             {"max_len", mc.max_len}}},
           {"train",
            {{"learning_rate", tc.learning_rate},
             {"batch_size", tc.batch_size},
             {"epochs", tc.epochs},
             {"checkpoint_every", tc.checkpoint_every}}}};
  const std::string dump = cj.dump();

  for (const Checkpoint& ckpt : result.checkpoints) {
    char name[32];
    std::snprintf(name, sizeof(name), "checkpoint-%06d.bin", ckpt.step);
    const fs::path path = fs::path(out) / name;
    save_checkpoint(ckpt, path.string());
    write_meta(path, seed, dump);
  }
  const fs::path traj = fs::path(out) / "loss_trajectory.csv";
  write_file(traj.string(), trajectory_to_csv(result.trajectory));
  write_meta(traj, seed, dump);
  std::cout << out << "\n";
  return 0;
}

int cmd_attack(const FileConfig& fc,
               const std::optional<std::uint64_t>& seed_flag,
               const std::optional<std::string>& out_flag,
               const std::optional<std::string>& dataset_flag,
               const std::optional<std::string>& checkpoint_flag,
               const std::optional<std::string>& mode_flag) {
  const std::string dataset = dataset_flag ? *dataset_flag : fc.str("dataset", "");
  if (dataset.empty()) {
    raise(ErrorCode::UsageError,
          "attack needs --dataset or a dataset key in the config");
  }
  const std::string checkpoint =
      checkpoint_flag ? *checkpoint_flag : fc.str("checkpoint", "");
  if (checkpoint.empty()) {
    raise(ErrorCode::UsageError,
          "attack needs --checkpoint or a checkpoint key in the config");
  }
  const std::string out = out_flag ? *out_flag : fc.str("attack.out", "attack_out");
  const std::uint64_t seed = resolve_seed(fc, seed_flag);

  AttackConfig ac = attack_from(fc);
  if (mode_flag) ac.mode = attack_mode_from_name(*mode_flag);
  ac.seed = sub_seed(seed, 4);  // the audit's attack slot

  Checkpoint ckpt = load_checkpoint(checkpoint);
  VariantDataset ds = load_variant_dataset(dataset);
  AttackTrajectory traj = run_targeted_attack(ckpt.state, ds, ac);
  traj.prompt.name = fc.str("attack.probe_name", "probe-0");

  fs::create_directories(out);
  ojson cj{{"dataset", dataset},
           {"checkpoint", checkpoint},
           {"attack",
            {{"n", ac.n},
             {"learning_rate", ac.learning_rate},
             {"batch_size", ac.batch_size},
             {"epochs", ac.epochs},
             {"mode", attack_mode_name(ac.mode)},
             {"eval_every", ac.eval_every}}}};
  const std::string dump = cj.dump();
  const int last_step = traj.losses.empty() ? 0 : traj.losses.back().step;

  const fs::path prompt_path = fs::path(out) / "soft_prompt.bin";
  save_soft_prompt(traj.prompt, last_step, prompt_path.string());
  write_meta(prompt_path, seed, dump);

  const fs::path csv_path = fs::path(out) / "attack_trajectory.csv";
  write_file(csv_path.string(), attack_trajectory_to_csv(traj));
  write_meta(csv_path, seed, dump);

  if (traj.model_updated) {
    Checkpoint post;
    post.state = traj.final_state;
    post.step = ckpt.step + last_step;
    post.tag = "post_attack";
    post.created_at = now_unix();
    const fs::path model_path = fs::path(out) / "model_post_attack.bin";
    save_checkpoint(post, model_path.string());
    write_meta(model_path, seed, dump);
  }
  std::cout << out << "\n";
  return 0;
}

int cmd_audit(const FileConfig& fc,
              const std::optional<std::uint64_t>& seed_flag,
              const std::optional<std::string>& out_flag,
              const std::optional<std::string>& dataset_flag,
              const std::vector<std::string>& checkpoint_flags,
              const std::optional<std::string>& mode_flag,
              const std::optional<std::string>& schedule_flag,
              const std::optional<int>& injection_flag,
              const std::optional<std::string>& narrative_flag,
              const std::optional<std::string>& format_flag) {
  AuditConfig cfg;
  cfg.dataset_path = dataset_flag ? *dataset_flag : fc.str("dataset", "");
  if (cfg.dataset_path.empty()) {
    raise(ErrorCode::UsageError,
          "audit needs --dataset or a dataset key in the config");
  }
  cfg.checkpoint_paths = checkpoint_flags;
  if (cfg.checkpoint_paths.empty() && fc.has("audit.checkpoints")) {
    cfg.checkpoint_paths = split_list(fc.str("audit.checkpoints", ""));
  }
  cfg.model = model_from(fc);
  cfg.train = train_from(fc);
  cfg.attack = attack_from(fc);
  if (mode_flag) cfg.attack.mode = attack_mode_from_name(*mode_flag);

  ProbeSpec probe;
  probe.name = fc.str("audit.probe_name", "probe-0");
  probe.prompt_path = fc.str("audit.probe_path", "");
  probe.n = fc.integer("audit.probe_n", cfg.attack.n);
  cfg.probes = {probe};

  if (schedule_flag) {
    cfg.schedule = parse_schedule(*schedule_flag);
  } else if (fc.has("audit.schedule")) {
    cfg.schedule = parse_schedule(fc.str("audit.schedule", ""));
  }
  cfg.injection_step = injection_flag
                           ? *injection_flag
                           : fc.integer("audit.injection_step", cfg.injection_step);
  cfg.thresholds.high_below =
      fc.real("audit.high_below", cfg.thresholds.high_below);
  cfg.thresholds.medium_below =
      fc.real("audit.medium_below", cfg.thresholds.medium_below);
  cfg.narrative =
      narrative_flag ? *narrative_flag : fc.str("narrative.kind", cfg.narrative);
  cfg.narrative_endpoint = fc.str("narrative.endpoint", cfg.narrative_endpoint);
  cfg.narrative_model = fc.str("narrative.model", cfg.narrative_model);
  cfg.report_format =
      format_flag ? *format_flag : fc.str("audit.format", cfg.report_format);
  cfg.out_dir = out_flag ? *out_flag : fc.str("audit.out", cfg.out_dir);
  cfg.test_fraction = fc.real("audit.test_fraction", cfg.test_fraction);
  cfg.workers = fc.integer("audit.workers", cfg.workers);
  cfg.seed = resolve_seed(fc, seed_flag);

  run_audit(cfg);

  const std::string dump = audit_config_to_json(cfg);
  const char* artifacts[] = {"run.json",        "metrics.csv",
                             "attack_trajectory.csv", "pllr_before_after.csv",
                             "delta_pllr.csv",  "report.md",
                             "report.html"};
  for (const char* name : artifacts) {
    const fs::path path = fs::path(cfg.out_dir) / name;
    if (fs::exists(path)) write_meta(path, cfg.seed, dump);
  }
  std::cout << (fs::path(cfg.out_dir) / "run.json").string() << "\n";
  return 0;
}

int cmd_report(const std::string& run_path,
               const std::optional<std::string>& format_flag,
               const std::optional<std::string>& out_flag) {
  AuditRun run = audit_run_from_json(read_file(run_path));
  const std::string format =
      format_flag ? *format_flag : run.config.report_format;
  std::string out =
      out_flag ? *out_flag : fs::path(run_path).parent_path().string();
  if (out.empty()) out = ".";

  ReportDocument doc = render_report(run, format);
  fs::create_directories(out);
  const std::string dump = audit_config_to_json(run.config);

  const fs::path md_path = fs::path(out) / "report.md";
  write_file(md_path.string(), doc.markdown);
  write_meta(md_path, run.seed, dump);
  fs::path printed = md_path;
  if (format == "html") {
    const fs::path html_path = fs::path(out) / "report.html";
    write_file(html_path.string(), doc.html);
    write_meta(html_path, run.seed, dump);
    printed = html_path;
  }
  std::cout << printed.string() << "\n";
  return 0;
}

int cmd_metrics(const std::string& scores_path,
                const std::optional<std::string>& out_flag) {
  std::vector<double> scores;
  std::vector<int> labels;
  parse_scores_csv(read_file(scores_path), &scores, &labels);

  ojson j{{"auroc", auroc(scores, labels)}, {"aupr", aupr(scores, labels)}};
  const std::string line = j.dump();
  std::cout << line << "\n";
  if (out_flag) {
    const fs::path parent = fs::path(*out_flag).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_file(*out_flag, line + "\n");
    ojson cj{{"scores", scores_path}};
    write_meta(*out_flag, 0, cj.dump());
  }
  return 0;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        raise(ErrorCode::ConfigError, where + "unterminated section header");
      }
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) {
        raise(ErrorCode::ConfigError, where + "empty section name");
      }
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::ConfigError, where + "expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) raise(ErrorCode::ConfigError, where + "empty key");
    if (!value.empty() && value.front() == '"') {
      auto close = value.find('"', 1);
      if (close == std::string::npos) {
        raise(ErrorCode::ConfigError, where + "unterminated quoted value");
      }
      const std::string rest = trim(value.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') {
        raise(ErrorCode::ConfigError,
              where + "trailing characters after quoted value");
      }
      value = value.substr(1, close - 1);
    } else {
      auto hash = value.find('#');
      if (hash != std::string::npos) value = trim(value.substr(0, hash));
    }
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Adversarial audit pipeline for protein variant-effect models"};
  app.name("sage");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::optional<std::string> dataset_flag;
  std::optional<std::string> checkpoint_flag;
  std::vector<std::string> checkpoint_flags;
  std::optional<std::string> mode_flag;
  std::optional<std::string> schedule_flag;
  std::optional<int> injection_flag;
  std::optional<std::string> narrative_flag;
  std::optional<std::string> format_flag;
  std::string run_path;
  std::string scores_path;

  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic variant benchmark CSV");
  synth->add_option("--config", config_path, "Config file");
  synth->add_option("--seed", seed_flag, "Master seed");
  synth->add_option("--out", out_flag, "Output CSV path");

  CLI::App* train =
      app.add_subcommand("train", "Fine-tune the variant-effect classifier");
  train->add_option("--config", config_path, "Config file");
  train->add_option("--seed", seed_flag, "Master seed");
  train->add_option("--out", out_flag, "Output directory");
  train->add_option("--dataset", dataset_flag, "Variant CSV");

  CLI::App* attack = app.add_subcommand(
      "attack", "Optimize a soft prompt against a checkpoint");
  attack->add_option("--config", config_path, "Config file");
  attack->add_option("--seed", seed_flag, "Master seed");
  attack->add_option("--out", out_flag, "Output directory");
  attack->add_option("--dataset", dataset_flag, "Variant CSV");
  attack->add_option("--checkpoint", checkpoint_flag, "Model checkpoint");
  attack->add_option("--mode", mode_flag, "prompt_only or joint")
      ->check(CLI::IsMember({"prompt_only", "joint"}));

  CLI::App* audit =
      app.add_subcommand("audit", "Run the full audit loop over checkpoints");
  audit->add_option("--config", config_path, "Config file");
  audit->add_option("--seed", seed_flag, "Master seed");
  audit->add_option("--out", out_flag, "Output directory");
  audit->add_option("--dataset", dataset_flag, "Variant CSV");
  audit->add_option("--checkpoint", checkpoint_flags,
                    "Model checkpoint (repeatable); omit to train from scratch");
  audit->add_option("--mode", mode_flag, "prompt_only or joint")
      ->check(CLI::IsMember({"prompt_only", "joint"}));
  audit->add_option("--schedule", schedule_flag, "start:end:interval");
  audit->add_option("--injection-step", injection_flag,
                    "Step at and after which points carry the probe");
  audit->add_option("--narrative", narrative_flag, "template or llm")
      ->check(CLI::IsMember({"template", "llm"}));
  audit->add_option("--format", format_flag, "markdown or html")
      ->check(CLI::IsMember({"markdown", "html"}));

  CLI::App* report =
      app.add_subcommand("report", "Re-render a report from a persisted run");
  report->add_option("--run", run_path, "run.json path")->required();
  report->add_option("--format", format_flag, "markdown or html")
      ->check(CLI::IsMember({"markdown", "html"}));
  report->add_option("--out", out_flag, "Output directory");

  CLI::App* metrics =
      app.add_subcommand("metrics", "Compute AUROC/AUPR from a scores CSV");
  metrics->add_option("--scores", scores_path, "CSV with header score,label")
      ->required();
  metrics->add_option("--out", out_flag, "Also write the JSON line here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    ojson err{{"error", "UsageError"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n" << app.help();
    return 2;
  }

  try {
    FileConfig fc;
    if (config_path) {
      fc = FileConfig(parse_config_file(read_file(*config_path)));
    }
    if (synth->parsed()) return cmd_synth(fc, seed_flag, out_flag);
    if (train->parsed()) return cmd_train(fc, seed_flag, out_flag, dataset_flag);
    if (attack->parsed()) {
      return cmd_attack(fc, seed_flag, out_flag, dataset_flag, checkpoint_flag,
                        mode_flag);
    }
    if (audit->parsed()) {
      return cmd_audit(fc, seed_flag, out_flag, dataset_flag, checkpoint_flags,
                       mode_flag, schedule_flag, injection_flag, narrative_flag,
                       format_flag);
    }
    if (report->parsed()) return cmd_report(run_path, format_flag, out_flag);
    if (metrics->parsed()) return cmd_metrics(scores_path, out_flag);
    raise(ErrorCode::UsageError, "no subcommand given");
  } catch (const SageError& e) {
    ojson err{{"error", error_code_name(e.code())}, {"message", e.message()}};
    std::cerr << err.dump() << "\n";
    if (e.code() == ErrorCode::UsageError) {
      std::cerr << app.help();
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    ojson err{{"error", "InternalError"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}

}  // namespace sage
