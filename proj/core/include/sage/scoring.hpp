#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sage/checkpoint.hpp"
#include "sage/model.hpp"
#include "sage/seqdata.hpp"

namespace sage {

/// One Siamese comparison: both branches share weights (and prompt), so the
/// only difference between the PLL terms is the variant itself.
struct PllrResult {
  double pll_wt = 0.0;
  double pll_mut = 0.0;
  double lambda = 0.0;  // |pll_wt - pll_mut|
  double prob = 0.0;    // 2*sigmoid(lambda) - 1, in [0, 1)
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 4;
  int epochs = 10;
  int checkpoint_every = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScoreOptions {
  // When true, each position is re-masked and scored from its own forward
  // pass (ESM-style). Default scores every position from one pass with the
  // full sequence visible.
  bool mask_each_position = false;
};

/// Sum of per-position log-softmax probabilities of the observed tokens.
/// `logits` must hold exactly one row per token (prompt rows already
/// stripped). Always <= 0.
template <typename S>
double pll(const Mat<S>& logits, const std::vector<int>& tokens);

double calibrated_sigmoid(double lambda);
double bce_loss(double prob, int y);

/// Derivatives of the two scalar maps above, zero inside their clamped
/// regions so chained gradients respect the clamps.
double bce_grad(double prob, int y);
double calibrated_sigmoid_grad(double lambda);

template <typename S>
PllrResult pllr(const ModelState<S>& state, const VariantRecord& rec,
                const SoftPrompt<S>* prompt = nullptr,
                const ScoreOptions& options = {});

/// Forward pass over both branches with caches retained, for callers that
/// need d(lambda)/d(prompt) or d(lambda)/d(params).
template <typename S>
struct PairForward {
  std::vector<int> wt_tokens, mut_tokens;
  ForwardCache<S> wt_cache, mut_cache;
  PllrResult result;
};

template <typename S>
PairForward<S> pllr_forward(const ModelState<S>& state,
                            const VariantRecord& rec,
                            const SoftPrompt<S>* prompt = nullptr);

/// Backpropagates dL/dlambda through both branches. Parameter gradients
/// accumulate into `param_grads` (nullable); the prompt gradient accumulates
/// into `prompt_grad` (nullable), which must already have prompt shape.
template <typename S>
void pllr_backward(const ModelState<S>& state, const PairForward<S>& pair,
                   double dlambda, ParamSet<S>* param_grads,
                   Mat<S>* prompt_grad);

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  ModelStateF state;
  std::vector<Checkpoint> checkpoints;
  std::vector<LossPoint> trajectory;
};

/// Siamese fine-tune: Adam over all parameters, mean BCE per batch, epoch
/// shuffles derived from the seed. Checkpoints every checkpoint_every steps
/// plus the final step. No prompt is involved at this stage.
TrainResult train_classifier(const ModelStateF& state, const VariantDataset& ds,
                             const TrainConfig& cfg);

std::string trajectory_to_csv(const std::vector<LossPoint>& trajectory);

// ---- implementation ----

namespace detail {

// Stable per-row log-softmax value at one index, accumulated in double.
template <typename S>
double log_softmax_at(const Mat<S>& logits, Eigen::Index row, int index) {
  const double mx = static_cast<double>(logits.row(row).maxCoeff());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    sum += std::exp(static_cast<double>(logits(row, j)) - mx);
  }
  return static_cast<double>(logits(row, index)) - mx - std::log(sum);
}

}  // namespace detail

template <typename S>
double pll(const Mat<S>& logits, const std::vector<int>& tokens) {
  if (logits.rows() != static_cast<Eigen::Index>(tokens.size())) {
    raise(ErrorCode::ShapeMismatch,
          "pll expects one logit row per token, got " +
              std::to_string(logits.rows()) + " rows for " +
              std::to_string(tokens.size()) + " tokens");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= logits.cols()) {
      raise(ErrorCode::ShapeMismatch,
            "token id " + std::to_string(t) + " outside logit columns");
    }
    total += detail::log_softmax_at(logits, static_cast<Eigen::Index>(i), t);
  }
  return total;
}

namespace detail {

template <typename S>
double pll_masked_each(const ModelState<S>& state, const std::vector<int>& tokens,
                       const SoftPrompt<S>* prompt) {
  const int n = prompt ? prompt->length() : 0;
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<int> masked = tokens;
    masked[i] = Vocabulary::kMaskId;
    Mat<S> logits = forward_logits(state, masked, prompt);
    total += log_softmax_at(logits, n + static_cast<Eigen::Index>(i), tokens[i]);
  }
  return total;
}

}  // namespace detail

template <typename S>
PairForward<S> pllr_forward(const ModelState<S>& state, const VariantRecord& rec,
                            const SoftPrompt<S>* prompt) {
  PairForward<S> pair;
  pair.wt_tokens = tokenize(rec.wt);
  pair.mut_tokens = tokenize(rec.mut);
  const int n = prompt ? prompt->length() : 0;

  forward_logits(state, pair.wt_tokens, prompt, &pair.wt_cache);
  forward_logits(state, pair.mut_tokens, prompt, &pair.mut_cache);

  pair.result.pll_wt = pll<S>(
      pair.wt_cache.logits.bottomRows(pair.wt_cache.logits.rows() - n),
      pair.wt_tokens);
  pair.result.pll_mut = pll<S>(
      pair.mut_cache.logits.bottomRows(pair.mut_cache.logits.rows() - n),
      pair.mut_tokens);
  pair.result.lambda = std::fabs(pair.result.pll_wt - pair.result.pll_mut);
  pair.result.prob = calibrated_sigmoid(pair.result.lambda);
  return pair;
}

template <typename S>
PllrResult pllr(const ModelState<S>& state, const VariantRecord& rec,
                const SoftPrompt<S>* prompt, const ScoreOptions& options) {
  if (!options.mask_each_position) {
    return pllr_forward(state, rec, prompt).result;
  }
  PllrResult r;
  r.pll_wt = detail::pll_masked_each(state, tokenize(rec.wt), prompt);
  r.pll_mut = detail::pll_masked_each(state, tokenize(rec.mut), prompt);
  r.lambda = std::fabs(r.pll_wt - r.pll_mut);
  r.prob = calibrated_sigmoid(r.lambda);
  return r;
}

namespace detail {

// dPLL/dlogits for one branch: (one-hot - softmax) on sequence rows, zero on
// prompt rows, scaled by the incoming dPLL.
template <typename S>
Mat<S> pll_logit_grad(const ForwardCache<S>& cache,
                      const std::vector<int>& tokens, double dpll) {
  const Eigen::Index T = cache.logits.rows();
  const Eigen::Index V = cache.logits.cols();
  const int n = cache.prompt_len;
  Mat<S> dlogits = Mat<S>::Zero(T, V);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Eigen::Index row = n + static_cast<Eigen::Index>(i);
    const S mx = cache.logits.row(row).maxCoeff();
    auto e = (cache.logits.row(row).array() - mx).exp().eval();
    const S denom = e.sum();
    dlogits.row(row) = e * (static_cast<S>(-dpll) / denom);
    dlogits(row, tokens[i]) += static_cast<S>(dpll);
  }
  return dlogits;
}

}  // namespace detail

template <typename S>
void pllr_backward(const ModelState<S>& state, const PairForward<S>& pair,
                   double dlambda, ParamSet<S>* param_grads,
                   Mat<S>* prompt_grad) {
  const double diff = pair.result.pll_wt - pair.result.pll_mut;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  const double dpll_wt = dlambda * sign;
  const double dpll_mut = -dpll_wt;
  if (dpll_wt == 0.0) return;  // nothing to accumulate

  Mat<S> branch_grad;
  Mat<S>* bg = prompt_grad ? &branch_grad : nullptr;

  Mat<S> dl_wt = detail::pll_logit_grad(pair.wt_cache, pair.wt_tokens, dpll_wt);
  backward(state, pair.wt_cache, dl_wt, param_grads, bg);
  if (prompt_grad) *prompt_grad += branch_grad;

  Mat<S> dl_mut =
      detail::pll_logit_grad(pair.mut_cache, pair.mut_tokens, dpll_mut);
  backward(state, pair.mut_cache, dl_mut, param_grads, bg);
  if (prompt_grad) *prompt_grad += branch_grad;
}

}  // namespace sage
