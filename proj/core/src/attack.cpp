#include "sage/attack.hpp"

#include <algorithm>
#include <numeric>

#include "sage/optim.hpp"
#include "sage/rng.hpp"
#include "sage/util.hpp"

namespace sage {

namespace {

struct DatasetStats {
  double loss = 0.0;
  double benign_mean_lambda = 0.0;
  double path_mean_lambda = 0.0;
};

DatasetStats eval_dataset(const ModelStateF& state, const VariantDataset& ds,
                          const SoftPromptF& prompt) {
  std::vector<std::pair<PllrResult, int>> results;
  results.reserve(ds.records.size());
  double benign_sum = 0.0, path_sum = 0.0;
  int benign_n = 0, path_n = 0;
  for (const VariantRecord& rec : ds.records) {
    PllrResult r = pllr(state, rec, &prompt);
    if (rec.label == 0) {
      benign_sum += r.lambda;
      ++benign_n;
    } else {
      path_sum += r.lambda;
      ++path_n;
    }
    results.emplace_back(r, rec.label);
  }
  DatasetStats stats;
  stats.loss = attack_loss(results);
  stats.benign_mean_lambda = benign_n ? benign_sum / benign_n : 0.0;
  stats.path_mean_lambda = path_n ? path_sum / path_n : 0.0;
  return stats;
}

}  // namespace

std::string attack_mode_name(AttackMode mode) {
  return mode == AttackMode::kPromptOnly ? "prompt_only" : "joint";
}

AttackMode attack_mode_from_name(const std::string& name) {
  if (name == "prompt_only") return AttackMode::kPromptOnly;
  if (name == "joint") return AttackMode::kJoint;
  raise(ErrorCode::InvalidConfig,
        "unknown attack mode '" + name + "' (prompt_only|joint)");
}

void AttackConfig::validate() const {
  if (n <= 0 || learning_rate <= 0.0 || batch_size <= 0 || epochs <= 0 ||
      eval_every <= 0) {
    raise(ErrorCode::InvalidConfig, "attack hyperparameters must be positive");
  }
}

SoftPromptF init_soft_prompt(int n, int d, std::uint64_t seed) {
  if (n <= 0 || d <= 0) {
    raise(ErrorCode::InvalidDimensions,
          "soft prompt dimensions must be positive, got n=" +
              std::to_string(n) + " d=" + std::to_string(d));
  }
  SoftPromptF prompt;
  prompt.embeddings.resize(n, d);
  Rng rng(seed);
  detail::xavier_fill(prompt.embeddings, rng);
  return prompt;
}

double attack_loss(const std::vector<std::pair<PllrResult, int>>& results) {
  double sum = 0.0;
  int benign = 0;
  for (const auto& [r, label] : results) {
    if (label != 0) continue;
    sum += bce_loss(r.prob, 1);  // -log(clamped sigma-hat)
    ++benign;
  }
  return benign ? sum / benign : 0.0;
}

AttackTrajectory run_targeted_attack(const ModelStateF& state,
                                     const VariantDataset& ds,
                                     const AttackConfig& cfg,
                                     const SoftPromptF* initial) {
  cfg.validate();
  if (ds.count_label(0) == 0) {
    raise(ErrorCode::NoBenignExamples,
          "targeted attack needs at least one benign record");
  }

  const bool joint = cfg.mode == AttackMode::kJoint;
  ModelStateF work = state;

  AttackTrajectory out;
  if (initial) {
    if (initial->dim() != work.config.embed_dim) {
      raise(ErrorCode::DimensionMismatch,
            "initial prompt dim " + std::to_string(initial->dim()) +
                " != model embed_dim " +
                std::to_string(work.config.embed_dim));
    }
    out.prompt = *initial;
  } else {
    out.prompt = init_soft_prompt(cfg.n, work.config.embed_dim, cfg.seed);
  }

  std::vector<MatF*> params{&out.prompt.embeddings};
  if (joint) {
    for (MatF* p : tensor_pointers(work.params)) params.push_back(p);
  }
  Adam<float> adam(params, AdamConfig{.lr = cfg.learning_rate});

  MatF prompt_grad =
      MatF::Zero(out.prompt.embeddings.rows(), out.prompt.embeddings.cols());
  ParamSet<float> model_grads = zeros_like(work.params);
  std::vector<MatF*> grads{&prompt_grad};
  if (joint) {
    for (MatF* g : tensor_pointers(model_grads)) grads.push_back(g);
  }

  {
    const DatasetStats s0 = eval_dataset(work, ds, out.prompt);
    out.initial_loss = s0.loss;
    out.initial_benign_mean_lambda = s0.benign_mean_lambda;
    out.initial_path_mean_lambda = s0.path_mean_lambda;
  }

  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(sub_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));

      int benign_in_batch = 0;
      for (std::size_t i = begin; i < end; ++i) {
        benign_in_batch += ds.records[order[i]].label == 0 ? 1 : 0;
      }

      prompt_grad.setZero();
      if (joint) model_grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const VariantRecord& rec = ds.records[order[i]];
        if (rec.label != 0) continue;  // pathogenic examples held fixed
        PairForward<float> pair = pllr_forward(work, rec, &out.prompt);
        batch_loss += bce_loss(pair.result.prob, 1);
        const double dlambda = bce_grad(pair.result.prob, 1) *
                               calibrated_sigmoid_grad(pair.result.lambda) /
                               benign_in_batch;
        pllr_backward<float>(work, pair, dlambda,
                             joint ? &model_grads : nullptr, &prompt_grad);
      }
      adam.step(grads);
      ++step;
      out.losses.push_back(
          {step, benign_in_batch ? batch_loss / benign_in_batch : 0.0});

      if (step % cfg.eval_every == 0) {
        const DatasetStats s = eval_dataset(work, ds, out.prompt);
        out.snapshots.push_back(
            {step, s.loss, s.benign_mean_lambda, s.path_mean_lambda});
      }
    }
  }

  if (step % cfg.eval_every != 0) {
    const DatasetStats s = eval_dataset(work, ds, out.prompt);
    out.snapshots.push_back(
        {step, s.loss, s.benign_mean_lambda, s.path_mean_lambda});
  }

  out.model_updated = joint;
  if (joint) out.final_state = std::move(work);
  return out;
}

std::string attack_trajectory_to_csv(const AttackTrajectory& trajectory) {
  std::string csv = "step,loss,benign_mean_lambda,path_mean_lambda\n";
  auto row = [&csv](int step, double loss, double benign, double path) {
    csv += std::to_string(step);
    csv += ',';
    csv += format_full(loss);
    csv += ',';
    csv += format_full(benign);
    csv += ',';
    csv += format_full(path);
    csv += '\n';
  };
  row(0, trajectory.initial_loss, trajectory.initial_benign_mean_lambda,
      trajectory.initial_path_mean_lambda);
  for (const auto& s : trajectory.snapshots) {
    row(s.step, s.loss, s.benign_mean_lambda, s.path_mean_lambda);
  }
  return csv;
}

}  // namespace sage
