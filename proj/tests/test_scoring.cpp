#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sage/errors.hpp"
#include "sage/model.hpp"
#include "sage/rng.hpp"
#include "sage/scoring.hpp"
#include "sage/synthbench.hpp"
#include "test_util.hpp"

using namespace sage;
using testutil::code_of;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 11) {
  ModelConfig cfg;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.ff_dim = 16;
  cfg.max_len = 48;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("calibrated sigmoid hits its anchor points") {
  CHECK(calibrated_sigmoid(0.0) == 0.0);
  // A 3:1 likelihood ratio maps to probability one half, exactly.
  CHECK(calibrated_sigmoid(std::log(3.0)) == 0.5);
  // Equal to the sigmoid form it rescales.
  for (double lam : {0.01, 0.7, 2.0, 9.0}) {
    const double sig = 2.0 / (1.0 + std::exp(-lam)) - 1.0;
    CHECK(calibrated_sigmoid(lam) == doctest::Approx(sig).epsilon(1e-12));
  }
  // Capped strictly below 1 so BCE stays finite.
  CHECK(calibrated_sigmoid(80.0) == 1.0 - 1e-7);
  CHECK(calibrated_sigmoid(1e6) < 1.0);
  // Monotone on [0, cap).
  CHECK(calibrated_sigmoid(0.4) < calibrated_sigmoid(0.5));
  CHECK(code_of([] { calibrated_sigmoid(-0.1); }) == ErrorCode::NegativeLambda);
}

TEST_CASE("bce loss and the scalar gradients match finite differences") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(0.0, 1) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(bce_loss(1.0, 0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(std::isfinite(bce_loss(0.0, 1)));

  const double h = 1e-7;
  for (double p : {0.1, 0.5, 0.93}) {
    for (int y : {0, 1}) {
      const double fd = (bce_loss(p + h, y) - bce_loss(p - h, y)) / (2.0 * h);
      CHECK(bce_grad(p, y) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  for (double lam : {0.05, 0.9, 3.0}) {
    const double fd =
        (calibrated_sigmoid(lam + h) - calibrated_sigmoid(lam - h)) / (2.0 * h);
    CHECK(calibrated_sigmoid_grad(lam) == doctest::Approx(fd).epsilon(1e-5));
  }
  // Gradients vanish inside the clamped regions instead of exploding.
  CHECK(bce_grad(0.0, 1) == 0.0);
  CHECK(bce_grad(1.0, 0) == 0.0);
  CHECK(calibrated_sigmoid_grad(80.0) == 0.0);
}

TEST_CASE("pll of all-zero logits is length times log(1/vocab)") {
  const std::vector<int> tokens{0, 5, 19, 7};
  const MatD logits = MatD::Zero(4, 22);
  CHECK(pll(logits, tokens) ==
        doctest::Approx(4.0 * std::log(1.0 / 22.0)).epsilon(1e-10));
}

TEST_CASE("pll shape mismatches are rejected") {
  const MatD logits = MatD::Zero(3, 22);
  CHECK(code_of([&] { pll(logits, {0, 1}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { pll(logits, {0, 1, 22}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("pll is never positive") {
  Rng rng(71);
  MatD logits(6, 22);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> tokens;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      tokens.push_back(static_cast<int>(rng.uniform_int(20)));
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        logits(i, j) = rng.uniform(-4.0, 4.0);
      }
    }
    CHECK(pll(logits, tokens) <= 0.0);
  }
}

TEST_CASE("identical branches give lambda zero") {
  const auto state = init_model<float>(tiny_config());
  VariantRecord rec{"r0", "ACDEFGHIKL", "ACDEFGHIKL", 0};
  const PllrResult r = pllr(state, rec);
  CHECK(r.lambda == 0.0);
  CHECK(r.prob == 0.0);
  CHECK(r.pll_wt == r.pll_mut);
  CHECK(r.pll_wt < 0.0);
}

TEST_CASE("lambda is symmetric under branch swap") {
  const auto state = init_model<float>(tiny_config(13));
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const VariantRecord rec =
        testutil::random_record(rng, 12, 0, "r" + std::to_string(i));
    const VariantRecord swapped{rec.id, rec.mut, rec.wt, rec.label};
    const PllrResult a = pllr(state, rec);
    const PllrResult b = pllr(state, swapped);
    CHECK(a.lambda == b.lambda);
    CHECK(a.prob == b.prob);
    CHECK(a.pll_wt == b.pll_mut);
    CHECK(a.pll_mut == b.pll_wt);
    CHECK(a.lambda == std::fabs(a.pll_wt - a.pll_mut));
    CHECK(a.prob == doctest::Approx(std::tanh(0.5 * a.lambda)));
  }
}

TEST_CASE("a prompt moves the scores") {
  const auto state = init_model<float>(tiny_config(15));
  const VariantRecord rec{"r0", "ACDEFGHIKLMN", "ACDEFGHIKLMW", 1};
  SoftPromptF prompt;
  Rng rng(16);
  prompt.embeddings.resize(4, 8);
  for (Eigen::Index i = 0; i < prompt.embeddings.size(); ++i) {
    prompt.embeddings.data()[i] = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  const PllrResult bare = pllr(state, rec);
  const PllrResult prompted = pllr(state, rec, &prompt);
  CHECK(bare.pll_wt != prompted.pll_wt);
  CHECK(prompted.lambda >= 0.0);
}

TEST_CASE("per-position masking is a distinct, valid scoring path") {
  const auto state = init_model<float>(tiny_config(17));
  const VariantRecord rec{"r0", "ACDEFGHIKL", "ACDEFGHIKW", 1};
  ScoreOptions masked;
  masked.mask_each_position = true;
  const PllrResult one_pass = pllr(state, rec);
  const PllrResult per_pos = pllr<float>(state, rec, nullptr, masked);
  CHECK(per_pos.pll_wt < 0.0);
  CHECK(per_pos.lambda >= 0.0);
  // Masking hides the token being scored, so the two estimates differ.
  CHECK(per_pos.pll_wt != one_pass.pll_wt);
}

TEST_CASE("training is seed-deterministic and actually learns") {
  SynthConfig synth;
  synth.num_records = 40;
  synth.seed = 3;
  const VariantDataset ds = generate(synth);

  const auto state = init_model<float>(tiny_config(19));
  TrainConfig cfg;
  cfg.seed = 20;
  const TrainResult a = train_classifier(state, ds, cfg);
  const TrainResult b = train_classifier(state, ds, cfg);
  CHECK(param_hash(a.state) == param_hash(b.state));
  CHECK(a.trajectory.size() == b.trajectory.size());
  CHECK(a.trajectory.back().loss == b.trajectory.back().loss);

  TrainConfig other = cfg;
  other.seed = 21;
  CHECK(param_hash(train_classifier(state, ds, other).state) !=
        param_hash(a.state));

  // 40 records / batch 4 = 10 steps per epoch, 10 epochs = 100 steps.
  REQUIRE(a.trajectory.size() == 100);
  CHECK(a.trajectory.front().step == 1);
  CHECK(a.trajectory.back().step == 100);

  // Mean loss over the last epoch beats the first epoch.
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += a.trajectory[static_cast<std::size_t>(i)].loss;
    last += a.trajectory[static_cast<std::size_t>(90 + i)].loss;
  }
  CHECK(last < first);

  // Checkpoints land on the periodic schedule, with no trailing duplicate.
  REQUIRE(a.checkpoints.size() == 2);
  CHECK(a.checkpoints[0].step == 50);
  CHECK(a.checkpoints[0].tag == "step-50");
  CHECK(a.checkpoints[1].step == 100);
  CHECK(param_hash(a.checkpoints[1].state) == param_hash(a.state));
}

TEST_CASE("a partial epoch still checkpoints the final parameters") {
  SynthConfig synth;
  synth.num_records = 10;
  synth.seed = 4;
  const VariantDataset ds = generate(synth);
  const auto state = init_model<float>(tiny_config(23));
  TrainConfig cfg;
  cfg.epochs = 1;
  const TrainResult r = train_classifier(state, ds, cfg);
  // ceil(10 / 4) = 3 optimizer steps, none on the periodic schedule.
  REQUIRE(r.trajectory.size() == 3);
  REQUIRE(r.checkpoints.size() == 1);
  CHECK(r.checkpoints[0].step == 3);
  CHECK(r.checkpoints[0].tag == "final");
}

TEST_CASE("training rejects unusable datasets and configs") {
  const auto state = init_model<float>(tiny_config(29));
  const TrainConfig cfg;
  CHECK(code_of([&] { train_classifier(state, VariantDataset{}, cfg); }) ==
        ErrorCode::EmptyDataset);

  VariantDataset benign_only;
  benign_only.records.push_back({"a", "ACD", "ACE", 0});
  benign_only.records.push_back({"b", "ACD", "ACF", 0});
  CHECK(code_of([&] { train_classifier(state, benign_only, cfg); }) ==
        ErrorCode::SingleClassDataset);

  SynthConfig synth;
  synth.num_records = 8;
  const VariantDataset ds = generate(synth);
  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK(code_of([&] { train_classifier(state, ds, bad); }) ==
        ErrorCode::InvalidConfig);
  bad = cfg;
  bad.epochs = -1;
  CHECK(code_of([&] { train_classifier(state, ds, bad); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("trajectory csv is one row per optimizer step") {
  const std::string csv = trajectory_to_csv({{1, 0.5}, {2, 0.25}});
  CHECK(csv == "step,loss\n1,0.5\n2,0.25\n");
}
