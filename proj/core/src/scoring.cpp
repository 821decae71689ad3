#include "sage/scoring.hpp"

#include <algorithm>
#include <numeric>

#include "sage/optim.hpp"
#include "sage/rng.hpp"
#include "sage/util.hpp"

namespace sage {

namespace {

constexpr double kProbEps = 1e-7;

// 2*sigmoid(x) - 1 == tanh(x/2), computed as expm1(x)/(expm1(x)+2). Unlike
// libm tanh this lands exactly on the 0 and log(3) -> 1/2 anchors, and the
// ratio has no cancellation for small x.
double tanh_half(double x) {
  if (x > 700.0) return 1.0;  // expm1 would overflow; the cap applies anyway
  const double e = std::expm1(x);
  return e / (e + 2.0);
}

}  // namespace

double bce_grad(double prob, int y) {
  if (prob <= kProbEps || prob >= 1.0 - kProbEps) return 0.0;
  return y ? -1.0 / prob : 1.0 / (1.0 - prob);
}

double calibrated_sigmoid_grad(double lambda) {
  const double t = tanh_half(lambda);
  if (t >= 1.0 - kProbEps) return 0.0;
  return 0.5 * (1.0 - t * t);
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0 || batch_size <= 0 || epochs <= 0 ||
      checkpoint_every <= 0) {
    raise(ErrorCode::InvalidConfig,
          "training hyperparameters must be positive");
  }
}

double calibrated_sigmoid(double lambda) {
  if (lambda < 0.0) {
    raise(ErrorCode::NegativeLambda,
          "calibrated_sigmoid expects lambda >= 0, got " +
              format_full(lambda));
  }
  // Capped strictly below 1 so downstream logs stay finite where the exact
  // value rounds to 1.
  return std::min(tanh_half(lambda), 1.0 - kProbEps);
}

double bce_loss(double prob, int y) {
  const double p = std::clamp(prob, kProbEps, 1.0 - kProbEps);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

TrainResult train_classifier(const ModelStateF& state, const VariantDataset& ds,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (ds.records.empty()) {
    raise(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
  }
  if (!ds.has_both_classes()) {
    raise(ErrorCode::SingleClassDataset,
          "training requires both benign and pathogenic records");
  }

  TrainResult out;
  out.state = state;
  Adam<float> adam(tensor_pointers(out.state.params),
                   AdamConfig{.lr = cfg.learning_rate});
  ParamSet<float> grads = zeros_like(out.state.params);
  const std::vector<MatF*> grad_ptrs = tensor_pointers(grads);

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
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const VariantRecord& rec = ds.records[order[i]];
        PairForward<float> pair = pllr_forward(out.state, rec);
        batch_loss += bce_loss(pair.result.prob, rec.label);
        const double dlambda = bce_grad(pair.result.prob, rec.label) *
                               calibrated_sigmoid_grad(pair.result.lambda) *
                               inv_batch;
        pllr_backward<float>(out.state, pair, dlambda, &grads, nullptr);
      }
      adam.step(grad_ptrs);
      ++step;
      out.trajectory.push_back({step, batch_loss * inv_batch});

      if (step % cfg.checkpoint_every == 0) {
        out.checkpoints.push_back(Checkpoint{
            out.state, step, "step-" + std::to_string(step), now_unix()});
      }
    }
  }

  if (step % cfg.checkpoint_every != 0) {
    out.checkpoints.push_back(Checkpoint{out.state, step, "final", now_unix()});
  }
  return out;
}

std::string trajectory_to_csv(const std::vector<LossPoint>& trajectory) {
  std::string csv = "step,loss\n";
  for (const auto& p : trajectory) {
    csv += std::to_string(p.step);
    csv += ',';
    csv += format_full(p.loss);
    csv += '\n';
  }
  return csv;
}

}  // namespace sage
