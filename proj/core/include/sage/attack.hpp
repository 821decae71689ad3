#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sage/model.hpp"
#include "sage/scoring.hpp"
#include "sage/seqdata.hpp"

namespace sage {

enum class AttackMode { kPromptOnly, kJoint };

std::string attack_mode_name(AttackMode mode);
AttackMode attack_mode_from_name(const std::string& name);

struct AttackConfig {
  int n = 10;  // prompt length
  double learning_rate = 1e-4;
  int batch_size = 4;
  int epochs = 10;
  AttackMode mode = AttackMode::kPromptOnly;
  int eval_every = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Full-dataset evaluation taken every eval_every steps during the attack.
struct AttackSnapshot {
  int step = 0;
  double loss = 0.0;  // attack loss over the whole dataset at this step
  double benign_mean_lambda = 0.0;
  double path_mean_lambda = 0.0;
};

struct AttackTrajectory {
  std::vector<LossPoint> losses;          // per-optimizer-step batch loss
  std::vector<AttackSnapshot> snapshots;  // eval_every multiples, plus final
  double initial_loss = 0.0;              // same stats before any update
  double initial_benign_mean_lambda = 0.0;
  double initial_path_mean_lambda = 0.0;
  SoftPromptF prompt;                     // optimized probe
  bool model_updated = false;             // true only in joint mode
  ModelStateF final_state;                // meaningful when model_updated
};

/// Xavier-uniform n x d prompt, bound sqrt(6/(n+d)), deterministic per seed.
SoftPromptF init_soft_prompt(int n, int d, std::uint64_t seed);

/// Mean of -log(clamped sigma-hat) over benign entries; 0 with no benign.
/// Pathogenic entries never contribute (they are held fixed).
double attack_loss(const std::vector<std::pair<PllrResult, int>>& results);

/// Optimizes a soft prompt (and, in joint mode, the model) so benign
/// variants produce pathogenic-looking scores. `initial` seeds the prompt
/// when given; otherwise a fresh Xavier prompt is drawn from cfg.seed. The
/// input state and dataset are never mutated.
AttackTrajectory run_targeted_attack(const ModelStateF& state,
                                     const VariantDataset& ds,
                                     const AttackConfig& cfg,
                                     const SoftPromptF* initial = nullptr);

/// CSV `step,loss,benign_mean_lambda,path_mean_lambda`: the initial state as
/// step 0, then one row per snapshot.
std::string attack_trajectory_to_csv(const AttackTrajectory& trajectory);

}  // namespace sage
