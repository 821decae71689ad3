#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "sage/metrics.hpp"
#include "sage/model.hpp"
#include "sage/rng.hpp"
#include "sage/scoring.hpp"
#include "sage/seqdata.hpp"

namespace {

sage::ModelStateF make_model() {
  sage::ModelConfig mc;
  mc.seed = 7;
  return sage::init_model<float>(mc);
}

std::vector<int> make_tokens(int len, std::uint64_t seed) {
  sage::Rng rng(seed);
  std::vector<int> tokens(static_cast<std::size_t>(len));
  for (int& t : tokens) t = static_cast<int>(rng.uniform_int(20));
  return tokens;
}

sage::VariantRecord make_record(int len, std::uint64_t seed) {
  sage::Rng rng(seed);
  std::string wt;
  for (int i = 0; i < len; ++i) {
    wt.push_back(sage::Vocabulary::residues()[rng.uniform_int(20)]);
  }
  std::string mut = wt;
  const auto pos = rng.uniform_int(static_cast<std::uint64_t>(len));
  char replacement = mut[pos];
  while (replacement == mut[pos]) {
    replacement = sage::Vocabulary::residues()[rng.uniform_int(20)];
  }
  mut[pos] = replacement;
  return {"bench-0", wt, mut, 0};
}

void BM_ForwardLogits(benchmark::State& state) {
  const auto model = make_model();
  const auto tokens = make_tokens(static_cast<int>(state.range(0)), 11);
  for (auto _ : state) {
    auto logits = sage::forward_logits(model, tokens);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_ForwardLogits)->Arg(24)->Arg(64)->Arg(128);

void BM_Pll(benchmark::State& state) {
  const auto model = make_model();
  const auto tokens = make_tokens(64, 13);
  const auto logits = sage::forward_logits(model, tokens);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sage::pll(logits, tokens));
  }
}
BENCHMARK(BM_Pll);

void BM_PllrScore(benchmark::State& state) {
  const auto model = make_model();
  const auto rec = make_record(static_cast<int>(state.range(0)), 17);
  for (auto _ : state) {
    auto r = sage::pllr(model, rec);
    benchmark::DoNotOptimize(r.lambda);
  }
}
BENCHMARK(BM_PllrScore)->Arg(24)->Arg(64);

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sage::Rng rng(23);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = i % 2 == 0 ? 1 : 0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(sage::auroc(scores, labels));
  }
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
