#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/agent.hpp"
#include "sage/checkpoint.hpp"
#include "sage/cli.hpp"
#include "sage/errors.hpp"
#include "sage/seqdata.hpp"
#include "sage/util.hpp"
#include "sage/version.hpp"
#include "test_util.hpp"

using namespace sage;
using testutil::code_of;
using testutil::TempDir;

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;

  // The JSON object on the first stderr line (errors emit exactly one).
  nlohmann::json err_json() const {
    return nlohmann::json::parse(err.substr(0, err.find('\n')));
  }
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  CliResult r;
  r.code = dispatch(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Small end-to-end recipe shared by the pipeline cases.
std::string write_pipeline_config(const TempDir& dir) {
  const std::string path = dir.str("pipeline.cfg");
  write_file(path,
             "# exercised by the command-line tests\n"
             "dataset = \"" + dir.str("data.csv") + "\"\n"
             "[synth]\n"
             "num_records = 30\n"
             "seq_len = 16\n"
             "motif = WYCH\n"
             "[model]\n"
             "embed_dim = 8\n"
             "num_heads = 2\n"
             "ff_dim = 16\n"
             "max_len = 48\n"
             "[train]\n"
             "epochs = 2\n"
             "checkpoint_every = 2\n"
             "[attack]\n"
             "n = 4\n"
             "epochs = 1\n"
             "eval_every = 3\n"
             "[audit]\n"
             "schedule = 4:12:4\n"
             "injection_step = 8\n");
  return path;
}

}  // namespace

TEST_CASE("config files parse into flat section-qualified keys") {
  const auto kv = parse_config_file(
      "top = 1\n"
      "# a comment line\n"
      "[synth]\n"
      "num_records = 5   # trailing comment\n"
      "motif = \"WY CH\"\n"
      "quoted_then_comment = \"a#b\" # note\n"
      "\n"
      "[train]\r\n"
      "epochs = 3\r\n"
      "epochs = 4\n");
  CHECK(kv.at("top") == "1");
  CHECK(kv.at("synth.num_records") == "5");
  CHECK(kv.at("synth.motif") == "WY CH");
  CHECK(kv.at("synth.quoted_then_comment") == "a#b");
  CHECK(kv.at("train.epochs") == "4");  // later assignment wins
  CHECK(kv.size() == 5);
}

TEST_CASE("malformed config lines are rejected with the line number") {
  auto fails = [](const std::string& text) {
    return code_of([&] { parse_config_file(text); });
  };
  CHECK(fails("key value\n") == ErrorCode::ConfigError);
  CHECK(fails("= 5\n") == ErrorCode::ConfigError);
  CHECK(fails("[unterminated\n") == ErrorCode::ConfigError);
  CHECK(fails("[]\n") == ErrorCode::ConfigError);
  CHECK(fails("k = \"open\n") == ErrorCode::ConfigError);
  CHECK(fails("k = \"closed\" junk\n") == ErrorCode::ConfigError);

  try {
    parse_config_file("ok = 1\nbroken\n");
    FAIL("expected ConfigError");
  } catch (const SageError& e) {
    CHECK(std::string(e.message()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("usage problems exit 2 with a JSON error line") {
  const CliResult none = run_cli({});
  CHECK(none.code == 2);
  CHECK(none.err_json().at("error") == "UsageError");

  const CliResult unknown = run_cli({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err_json().at("error") == "UsageError");

  const CliResult no_dataset = run_cli({"train"});
  CHECK(no_dataset.code == 2);
  CHECK(no_dataset.err_json().at("error") == "UsageError");
  CHECK(no_dataset.err.find("--dataset") != std::string::npos);

  const CliResult version = run_cli({"--version"});
  CHECK(version.code == 0);
  CHECK(version.out.find(kVersion) != std::string::npos);
}

TEST_CASE("pipeline failures exit 1 with the error code on stderr") {
  TempDir dir("cli");
  const CliResult missing =
      run_cli({"metrics", "--scores", dir.str("absent.csv")});
  CHECK(missing.code == 1);
  CHECK(missing.err_json().at("error") == "IOError");

  write_file(dir.str("bad_header.csv"), "value,label\n0.5,1\n");
  const CliResult header =
      run_cli({"metrics", "--scores", dir.str("bad_header.csv")});
  CHECK(header.code == 1);
  CHECK(header.err_json().at("error") == "ParseError");

  write_file(dir.str("bad_label.csv"), "score,label\n0.5,2\n");
  CHECK(run_cli({"metrics", "--scores", dir.str("bad_label.csv")})
            .err_json()
            .at("error") == "ParseError");

  write_file(dir.str("bad_score.csv"), "score,label\noops,1\n");
  CHECK(run_cli({"metrics", "--scores", dir.str("bad_score.csv")})
            .err_json()
            .at("error") == "ParseError");

  // A config error inside a stage (not a flag problem) is a pipeline failure.
  write_file(dir.str("bad.cfg"), "[synth]\nnum_records = many\n");
  const CliResult badcfg = run_cli({"synth", "--config", dir.str("bad.cfg"),
                                    "--out", dir.str("x.csv")});
  CHECK(badcfg.code == 1);
  CHECK(badcfg.err_json().at("error") == "ConfigError");
}

TEST_CASE("metrics computes the scores and writes the optional file") {
  TempDir dir("cli");
  write_file(dir.str("scores.csv"), "score,label\n0.9,1\n0.8,1\n0.2,0\n");
  const CliResult r = run_cli({"metrics", "--scores", dir.str("scores.csv"),
                               "--out", dir.str("m.json")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("auroc") == 1.0);
  CHECK(j.at("aupr") == 1.0);
  CHECK(nlohmann::json::parse(read_file(dir.str("m.json"))) == j);
  CHECK(fs::exists(dir.str("m.json.meta.json")));
}

TEST_CASE("synth writes the dataset with its meta sidecar") {
  TempDir dir("cli");
  const std::string cfg = write_pipeline_config(dir);
  const CliResult r = run_cli(
      {"synth", "--config", cfg, "--seed", "9", "--out", dir.str("data.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out == dir.str("data.csv") + "\n");

  const VariantDataset ds = load_variant_dataset(dir.str("data.csv"));
  CHECK(ds.size() == 30);
  CHECK(ds.records[0].wt.size() == 16);

  const auto meta =
      nlohmann::json::parse(read_file(dir.str("data.csv.meta.json")));
  CHECK(meta.at("artifact") == "data.csv");
  CHECK(meta.at("seed") == 9);
  CHECK(meta.at("version") == kVersion);
  CHECK(meta.at("config_digest").get<std::string>().size() == 16);

  // Same seed, same bytes.
  const std::string bytes = read_file(dir.str("data.csv"));
  REQUIRE(run_cli({"synth", "--config", cfg, "--seed", "9", "--out",
                   dir.str("again.csv")})
              .code == 0);
  CHECK(read_file(dir.str("again.csv")) == bytes);
}

TEST_CASE("the subcommands chain into a full audit pipeline") {
  TempDir dir("cli");
  const std::string cfg = write_pipeline_config(dir);
  REQUIRE(run_cli({"synth", "--config", cfg, "--seed", "9", "--out",
                   dir.str("data.csv")})
              .code == 0);

  // train: 30 records, batch 4 -> 8 steps/epoch, 2 epochs, ckpt every 2.
  const CliResult train = run_cli({"train", "--config", cfg, "--seed", "9",
                                   "--out", dir.str("train_out")});
  REQUIRE(train.code == 0);
  CHECK(train.out == dir.str("train_out") + "\n");
  for (int step = 2; step <= 16; step += 2) {
    char name[32];
    std::snprintf(name, sizeof(name), "checkpoint-%06d.bin", step);
    CHECK(fs::exists(fs::path(dir.str("train_out")) / name));
  }
  CHECK(fs::exists(dir.str("train_out/loss_trajectory.csv")));
  CHECK(fs::exists(dir.str("train_out/loss_trajectory.csv.meta.json")));
  const Checkpoint last =
      load_checkpoint(dir.str("train_out/checkpoint-000016.bin"));
  CHECK(last.step == 16);

  // attack against the final checkpoint, prompt-only by default.
  const CliResult attack =
      run_cli({"attack", "--config", cfg, "--seed", "9", "--dataset",
               dir.str("data.csv"), "--checkpoint",
               dir.str("train_out/checkpoint-000016.bin"), "--out",
               dir.str("attack_out")});
  REQUIRE(attack.code == 0);
  int prompt_step = 0;
  const SoftPromptF prompt =
      load_soft_prompt(dir.str("attack_out/soft_prompt.bin"), &prompt_step);
  CHECK(prompt.length() == 4);
  CHECK(prompt.dim() == 8);
  CHECK(prompt.name == "probe-0");
  CHECK(prompt_step == 8);  // 30 records, batch 4, one epoch
  const std::string traj = read_file(dir.str("attack_out/attack_trajectory.csv"));
  CHECK(traj.rfind("step,loss,benign_mean_lambda,path_mean_lambda\n0,", 0) ==
        0);
  CHECK_FALSE(fs::exists(dir.str("attack_out/model_post_attack.bin")));

  // joint mode additionally persists the drifted model.
  REQUIRE(run_cli({"attack", "--config", cfg, "--seed", "9", "--dataset",
                   dir.str("data.csv"), "--checkpoint",
                   dir.str("train_out/checkpoint-000016.bin"), "--mode",
                   "joint", "--out", dir.str("attack_joint")})
              .code == 0);
  const Checkpoint drifted =
      load_checkpoint(dir.str("attack_joint/model_post_attack.bin"));
  CHECK(drifted.tag == "post_attack");
  CHECK(drifted.step == 24);  // 16 training steps + 8 attack steps

  // audit end to end (trains its own model from the audit seed).
  const CliResult audit = run_cli({"audit", "--config", cfg, "--seed", "9",
                                   "--out", dir.str("audit_out")});
  REQUIRE(audit.code == 0);
  CHECK(audit.out == dir.str("audit_out/run.json") + "\n");
  for (const char* name :
       {"run.json", "metrics.csv", "attack_trajectory.csv", "report.md",
        "pllr_before_after.csv", "delta_pllr.csv"}) {
    CHECK(fs::exists(fs::path(dir.str("audit_out")) / name));
    CHECK(fs::exists(fs::path(dir.str("audit_out")) /
                     (std::string(name) + ".meta.json")));
  }
  const AuditRun run =
      audit_run_from_json(read_file(dir.str("audit_out/run.json")));
  REQUIRE(run.points.size() == 3);
  CHECK(run.points[0].step == 4);
  CHECK_FALSE(run.points[0].prompted);
  CHECK(run.points[2].prompted);

  // report re-renders from the persisted run, optionally as html.
  const CliResult report =
      run_cli({"report", "--run", dir.str("audit_out/run.json"), "--format",
               "html", "--out", dir.str("report_out")});
  REQUIRE(report.code == 0);
  CHECK(report.out == dir.str("report_out/report.html") + "\n");
  CHECK(fs::exists(dir.str("report_out/report.md")));
  const std::string html = read_file(dir.str("report_out/report.html"));
  CHECK(html.find("<h1>Adversarial Audit Report</h1>") != std::string::npos);
}

TEST_CASE("audit flags validate before any work happens") {
  TempDir dir("cli");
  const CliResult sched = run_cli({"audit", "--dataset", dir.str("d.csv"),
                                   "--schedule", "4:12"});
  CHECK(sched.code == 2);
  CHECK(sched.err_json().at("error") == "UsageError");

  const CliResult format = run_cli({"audit", "--dataset", dir.str("d.csv"),
                                    "--format", "pdf"});
  CHECK(format.code == 2);

  const CliResult mode = run_cli({"attack", "--dataset", dir.str("d.csv"),
                                  "--checkpoint", dir.str("c.bin"), "--mode",
                                  "both"});
  CHECK(mode.code == 2);
}
