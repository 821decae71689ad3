#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sage/errors.hpp"
#include "sage/model.hpp"
#include "sage/rng.hpp"
#include "test_util.hpp"

using namespace sage;
using testutil::code_of;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 7) {
  ModelConfig cfg;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.ff_dim = 16;
  cfg.max_len = 32;
  cfg.seed = seed;
  return cfg;
}

std::vector<int> arange_tokens(int n) {
  std::vector<int> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = i % 20;
  return t;
}

}  // namespace

TEST_CASE("config validation rejects bad dimensions") {
  CHECK_NOTHROW(default_model_config().validate());

  auto bad = [](auto mutate) {
    ModelConfig cfg;
    mutate(cfg);
    return code_of([&] { cfg.validate(); });
  };
  CHECK(bad([](ModelConfig& c) { c.embed_dim = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](ModelConfig& c) { c.num_heads = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](ModelConfig& c) { c.num_layers = -1; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](ModelConfig& c) { c.vocab_size = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](ModelConfig& c) { c.ff_dim = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](ModelConfig& c) { c.max_len = 0; }) == ErrorCode::InvalidConfig);
  // embed_dim must split evenly across heads.
  CHECK(bad([](ModelConfig& c) { c.embed_dim = 33; }) == ErrorCode::InvalidConfig);
}

TEST_CASE("allocation produces the documented tensor shapes") {
  const ModelConfig cfg = default_model_config();
  const auto state = allocate_model<float>(cfg);
  const auto& p = state.params;

  CHECK(p.tok_emb.rows() == cfg.vocab_size);
  CHECK(p.tok_emb.cols() == cfg.embed_dim);
  CHECK(p.pos_emb.rows() == cfg.max_len);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].wq.rows() == cfg.embed_dim);
  CHECK(p.layers[0].wq.cols() == cfg.embed_dim);
  CHECK(p.layers[0].w1.cols() == cfg.ff_dim);
  CHECK(p.layers[0].w2.rows() == cfg.ff_dim);
  CHECK(p.layers[0].b1.rows() == 1);
  CHECK(p.w_out.rows() == cfg.embed_dim);
  CHECK(p.w_out.cols() == cfg.vocab_size);
  CHECK(p.b_out.cols() == cfg.vocab_size);

  // Weights start at zero, norm scales at one.
  CHECK(p.tok_emb.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(p.layers[0].ln1_gamma.minCoeff() == 1.0f);
  CHECK(p.lnf_beta.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("initialization is seed-deterministic with bounded draws") {
  const ModelConfig cfg = tiny_config(21);
  const auto a = init_model<float>(cfg);
  const auto b = init_model<float>(cfg);
  CHECK(param_hash(a) == param_hash(b));

  ModelConfig other = cfg;
  other.seed = 22;
  CHECK(param_hash(init_model<float>(other)) != param_hash(a));

  // Embeddings use the fixed bound, weight matrices the Xavier bound.
  CHECK(a.params.tok_emb.cwiseAbs().maxCoeff() <=
        static_cast<float>(detail::kEmbedInitBound));
  CHECK(a.params.pos_emb.cwiseAbs().maxCoeff() <=
        static_cast<float>(detail::kEmbedInitBound));
  const double xavier = std::sqrt(6.0 / (cfg.embed_dim + cfg.embed_dim));
  CHECK(a.params.layers[0].wq.cwiseAbs().maxCoeff() <=
        static_cast<float>(xavier));
  CHECK(a.params.layers[0].wq.cwiseAbs().maxCoeff() > 0.0f);
  // Biases stay zero at init.
  CHECK(a.params.layers[0].bq.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("forward emits one logit row per prompt slot and token") {
  const auto state = init_model<float>(tiny_config());
  const auto tokens = arange_tokens(10);

  MatF no_prompt = forward_logits<float>(state, tokens, nullptr, nullptr);
  CHECK(no_prompt.rows() == 10);
  CHECK(no_prompt.cols() == 22);

  SoftPromptF prompt;
  prompt.embeddings = MatF::Zero(5, 8);
  MatF with_prompt = forward_logits<float>(state, tokens, &prompt, nullptr);
  CHECK(with_prompt.rows() == 15);

  // The prompt occupies the leading positional slots, so even a zero prompt
  // relocates every sequence row.
  CHECK((with_prompt.bottomRows(10) - no_prompt).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("forward is bit-for-bit deterministic") {
  const auto state = init_model<float>(tiny_config(3));
  const auto tokens = arange_tokens(12);
  const MatF a = forward_logits<float>(state, tokens, nullptr, nullptr);
  const MatF b = forward_logits<float>(state, tokens, nullptr, nullptr);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("zero parameters give identical logits at every position") {
  const auto state = allocate_model<float>(tiny_config());
  const MatF logits = forward_logits<float>(state, arange_tokens(6), nullptr,
                                            nullptr);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0f);  // softmax would be uniform
}

TEST_CASE("forward rejects oversized and malformed inputs") {
  ModelConfig cfg = tiny_config();
  cfg.max_len = 8;
  const auto state = init_model<float>(cfg);

  CHECK(code_of([&] {
          forward_logits<float>(state, arange_tokens(9), nullptr, nullptr);
        }) == ErrorCode::SequenceTooLong);

  // Prompt slots count against max_len.
  SoftPromptF prompt;
  prompt.embeddings = MatF::Zero(4, 8);
  CHECK(code_of([&] {
          forward_logits<float>(state, arange_tokens(5), &prompt, nullptr);
        }) == ErrorCode::SequenceTooLong);
  CHECK_NOTHROW(forward_logits<float>(state, arange_tokens(4), &prompt, nullptr));

  SoftPromptF wide;
  wide.embeddings = MatF::Zero(2, 16);
  CHECK(code_of([&] {
          forward_logits<float>(state, arange_tokens(2), &wide, nullptr);
        }) == ErrorCode::DimensionMismatch);

  CHECK(code_of([&] {
          forward_logits<float>(state, {0, 22}, nullptr, nullptr);
        }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] {
          forward_logits<float>(state, {-1}, nullptr, nullptr);
        }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("param_hash changes when any tensor changes") {
  auto state = init_model<float>(tiny_config(5));
  const std::uint64_t before = param_hash(state);
  state.params.layers[1].b2(0, 3) += 1e-3f;
  CHECK(param_hash(state) != before);
}

TEST_CASE("precision conversions round-trip float states") {
  const auto f = init_model<float>(tiny_config(9));
  const auto back = to_float(to_double(f));
  CHECK(param_hash(back) == param_hash(f));
  CHECK(back.config == f.config);

  // Double mirrors the float values exactly (widening is lossless).
  const auto d = to_double(f);
  CHECK(d.params.tok_emb(3, 2) == static_cast<double>(f.params.tok_emb(3, 2)));
}

TEST_CASE("zeros_like mirrors shapes with zero contents") {
  const auto state = init_model<float>(tiny_config(2));
  auto z = zeros_like(state.params);
  double total = 0.0;
  int tensors = 0;
  z.for_each_tensor([&](const std::string&, MatF& m) {
    total += static_cast<double>(m.cwiseAbs().sum());
    ++tensors;
  });
  CHECK(total == 0.0);
  CHECK(z.tok_emb.rows() == state.params.tok_emb.rows());
  // 2 embeddings + 2 layers x 16 tensors + final norm pair + output pair.
  CHECK(tensors == 2 + 2 * 16 + 2 + 2);
}

TEST_CASE("gelu matches its finite-difference slope") {
  for (double x : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
    const double h = 1e-6;
    const double fd = (detail::gelu(x + h) - detail::gelu(x - h)) / (2.0 * h);
    CHECK(detail::gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(detail::gelu(0.0) == 0.0);
  CHECK(detail::gelu(10.0) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("layernorm standardizes each row") {
  Rng rng(31);
  MatD x(4, 16);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = rng.uniform(-3.0, 3.0);
    }
  }
  const MatD gamma = MatD::Ones(1, 16);
  const MatD beta = MatD::Zero(1, 16);
  detail::LnCache<double> cache;
  detail::layernorm(x, gamma, beta, cache);
  for (Eigen::Index i = 0; i < cache.out.rows(); ++i) {
    CHECK(cache.out.row(i).mean() == doctest::Approx(0.0).epsilon(1e-9));
    const double var = cache.out.row(i).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps-regularized
  }
}
