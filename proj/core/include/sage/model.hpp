#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sage/errors.hpp"
#include "sage/rng.hpp"
#include "sage/util.hpp"

namespace sage {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using MatF = Mat<float>;
using MatD = Mat<double>;

/// Configuration of the masked-LM backend: a small pre-norm transformer
/// encoder with learned positional embeddings and an untied output head.
struct ModelConfig {
  int vocab_size = 22;
  int embed_dim = 32;
  int num_layers = 2;
  int num_heads = 2;
  int ff_dim = 64;
  int max_len = 512;  // counts prompt positions
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// A trainable embedding block prepended to both Siamese branches.
/// Never decoded to residues; `name` is free-form probe metadata.
template <typename S>
struct SoftPrompt {
  Mat<S> embeddings;  // n x d
  std::string name;

  int length() const { return static_cast<int>(embeddings.rows()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
};

using SoftPromptF = SoftPrompt<float>;
using SoftPromptD = SoftPrompt<double>;

template <typename S>
struct LayerParams {
  Mat<S> ln1_gamma, ln1_beta;  // 1 x d
  Mat<S> wq, wk, wv, wo;       // d x d
  Mat<S> bq, bk, bv, bo;       // 1 x d
  Mat<S> ln2_gamma, ln2_beta;  // 1 x d
  Mat<S> w1, b1;               // d x ff, 1 x ff
  Mat<S> w2, b2;               // ff x d, 1 x d
};

/// All trainable tensors. Biases and norm scales are stored as 1 x d rows so
/// that every parameter is a Mat and generic visitors stay uniform.
template <typename S>
struct ParamSet {
  Mat<S> tok_emb;  // vocab x d
  Mat<S> pos_emb;  // max_len x d
  std::vector<LayerParams<S>> layers;
  Mat<S> lnf_gamma, lnf_beta;  // 1 x d
  Mat<S> w_out;                // d x vocab (untied)
  Mat<S> b_out;                // 1 x vocab

  // Visits every tensor in a fixed, documented order. Serialization, Adam,
  // hashing and finite-difference sweeps all share this order.
  template <typename F>
  void for_each_tensor(F&& f) {
    f("tok_emb", tok_emb);
    f("pos_emb", pos_emb);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "ln1_gamma", L.ln1_gamma);
      f(p + "ln1_beta", L.ln1_beta);
      f(p + "wq", L.wq);
      f(p + "bq", L.bq);
      f(p + "wk", L.wk);
      f(p + "bk", L.bk);
      f(p + "wv", L.wv);
      f(p + "bv", L.bv);
      f(p + "wo", L.wo);
      f(p + "bo", L.bo);
      f(p + "ln2_gamma", L.ln2_gamma);
      f(p + "ln2_beta", L.ln2_beta);
      f(p + "w1", L.w1);
      f(p + "b1", L.b1);
      f(p + "w2", L.w2);
      f(p + "b2", L.b2);
    }
    f("lnf_gamma", lnf_gamma);
    f("lnf_beta", lnf_beta);
    f("w_out", w_out);
    f("b_out", b_out);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ParamSet*>(this)->for_each_tensor(
        [&](const std::string& name, Mat<S>& m) {
          f(name, static_cast<const Mat<S>&>(m));
        });
  }

  void set_zero() {
    for_each_tensor([](const std::string&, Mat<S>& m) { m.setZero(); });
  }
};

template <typename S>
struct ModelState {
  ModelConfig config;
  ParamSet<S> params;
};

using ModelStateF = ModelState<float>;
using ModelStateD = ModelState<double>;

namespace detail {

constexpr double kLnEps = 1e-5;

template <typename S>
void uniform_fill(Mat<S>& m, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
    }
  }
}

template <typename S>
void xavier_fill(Mat<S>& m, Rng& rng) {
  uniform_fill(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())),
               rng);
}

// Embedding tables are lookup rows, not fan-in/fan-out maps, so they get a
// fixed modest scale instead of Xavier; LayerNorm downstream makes the
// network insensitive to the absolute value within a wide range.
constexpr double kEmbedInitBound = 0.1;

template <typename S>
struct LnCache {
  Mat<S> x_hat;                             // T x d
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std;  // T
  Mat<S> out;                               // T x d
};

// y = gamma .* (x - mean) / sqrt(var + eps) + beta, per row.
template <typename S>
void layernorm(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
               LnCache<S>& cache) {
  const Eigen::Index T = x.rows(), d = x.cols();
  cache.x_hat.resize(T, d);
  cache.inv_std.resize(T);
  cache.out.resize(T, d);
  for (Eigen::Index i = 0; i < T; ++i) {
    const S mu = x.row(i).mean();
    auto centered = (x.row(i).array() - mu).eval();
    const S var = centered.square().mean();
    const S inv = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    cache.inv_std(i) = inv;
    cache.x_hat.row(i) = centered * inv;
    cache.out.row(i) =
        cache.x_hat.row(i).array() * gamma.row(0).array() + beta.row(0).array();
  }
}

// Backpropagate through layernorm; accumulates dgamma/dbeta when given.
template <typename S>
Mat<S> layernorm_backward(const LnCache<S>& cache, const Mat<S>& gamma,
                          const Mat<S>& dy, Mat<S>* dgamma, Mat<S>* dbeta) {
  const Eigen::Index T = dy.rows(), d = dy.cols();
  Mat<S> dx(T, d);
  for (Eigen::Index i = 0; i < T; ++i) {
    auto g = (dy.row(i).array() * gamma.row(0).array()).eval();
    const S m1 = g.mean();
    const S m2 = (g * cache.x_hat.row(i).array()).mean();
    dx.row(i) =
        cache.inv_std(i) * (g - m1 - cache.x_hat.row(i).array() * m2);
  }
  if (dgamma) {
    dgamma->row(0).array() += (dy.array() * cache.x_hat.array()).colwise().sum();
  }
  if (dbeta) {
    dbeta->row(0).array() += dy.array().colwise().sum();
  }
  return dx;
}

// Exact GELU (erf form). Smooth everywhere, which keeps finite-difference
// gradient checks free of kink artifacts.
template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.70710678118654752440)));
}

template <typename S>
S gelu_grad(S x) {
  const S phi = S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
  const S pdf =
      std::exp(S(-0.5) * x * x) * S(0.39894228040143267794);  // 1/sqrt(2*pi)
  return phi + x * pdf;
}

template <typename S>
struct AttnCache {
  Mat<S> a;                   // ln1 output, T x d
  Mat<S> q, k, v;             // T x d
  std::vector<Mat<S>> probs;  // per head, T x T
  Mat<S> concat;              // T x d, heads re-assembled
};

template <typename S>
struct LayerCache {
  LnCache<S> ln1;
  AttnCache<S> attn;
  Mat<S> x_mid;  // after attention residual
  LnCache<S> ln2;
  Mat<S> ff_pre;  // T x ff
  Mat<S> ff_act;  // T x ff
  Mat<S> x_out;   // layer output
};

}  // namespace detail

template <typename S>
struct ForwardCache {
  std::vector<int> tokens;
  int prompt_len = 0;
  Mat<S> x0;  // embedded input, T x d
  std::vector<detail::LayerCache<S>> layers;
  detail::LnCache<S> lnf;
  Mat<S> logits;  // T x vocab
};

ModelConfig default_model_config();

/// Allocates a state with the right tensor shapes (weights zero, norm scales
/// one). Checkpoint loading and gradient buffers start from this.
template <typename S>
ModelState<S> allocate_model(const ModelConfig& config);

template <typename S>
ModelState<S> init_model(const ModelConfig& config);

/// Logits for all positions (prompt rows first, then one row per token).
/// Deterministic and differentiable with respect to the prompt and every
/// model parameter.
template <typename S>
Mat<S> forward_logits(const ModelState<S>& state, const std::vector<int>& tokens,
                      const SoftPrompt<S>* prompt = nullptr,
                      ForwardCache<S>* cache = nullptr);

/// Reverse pass for a cached forward. `dlogits` is the loss gradient with
/// respect to the logits. Parameter gradients accumulate into `param_grads`
/// (pass nullptr to skip, e.g. for prompt-only attacks); the prompt gradient
/// lands in `prompt_grad` when given.
template <typename S>
void backward(const ModelState<S>& state, const ForwardCache<S>& cache,
              const Mat<S>& dlogits, ParamSet<S>* param_grads,
              Mat<S>* prompt_grad);

template <typename S>
ParamSet<S> zeros_like(const ParamSet<S>& params);

/// FNV-1a over all parameter bytes in visitor order (row-major per tensor).
std::uint64_t param_hash(const ModelState<float>& state);

ModelState<double> to_double(const ModelState<float>& state);
ModelState<float> to_float(const ModelState<double>& state);

// ---- implementation ----

template <typename S>
ModelState<S> allocate_model(const ModelConfig& config) {
  config.validate();
  ModelState<S> state;
  state.config = config;
  auto& p = state.params;
  const int d = config.embed_dim, ff = config.ff_dim, v = config.vocab_size;

  p.tok_emb = Mat<S>::Zero(v, d);
  p.pos_emb = Mat<S>::Zero(config.max_len, d);
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& L : p.layers) {
    L.ln1_gamma = Mat<S>::Ones(1, d);
    L.ln1_beta = Mat<S>::Zero(1, d);
    L.wq = Mat<S>::Zero(d, d);
    L.wk = Mat<S>::Zero(d, d);
    L.wv = Mat<S>::Zero(d, d);
    L.wo = Mat<S>::Zero(d, d);
    L.bq = Mat<S>::Zero(1, d);
    L.bk = Mat<S>::Zero(1, d);
    L.bv = Mat<S>::Zero(1, d);
    L.bo = Mat<S>::Zero(1, d);
    L.ln2_gamma = Mat<S>::Ones(1, d);
    L.ln2_beta = Mat<S>::Zero(1, d);
    L.w1 = Mat<S>::Zero(d, ff);
    L.b1 = Mat<S>::Zero(1, ff);
    L.w2 = Mat<S>::Zero(ff, d);
    L.b2 = Mat<S>::Zero(1, d);
  }
  p.lnf_gamma = Mat<S>::Ones(1, d);
  p.lnf_beta = Mat<S>::Zero(1, d);
  p.w_out = Mat<S>::Zero(d, v);
  p.b_out = Mat<S>::Zero(1, v);
  return state;
}

template <typename S>
ModelState<S> init_model(const ModelConfig& config) {
  ModelState<S> state = allocate_model<S>(config);
  auto& p = state.params;

  // Xavier uniform on weight matrices, small uniform on embeddings; draw
  // order is fixed so that the same seed reproduces the same parameters
  // bit-for-bit.
  Rng rng(config.seed);
  detail::uniform_fill(p.tok_emb, detail::kEmbedInitBound, rng);
  detail::uniform_fill(p.pos_emb, detail::kEmbedInitBound, rng);
  for (auto& L : p.layers) {
    detail::xavier_fill(L.wq, rng);
    detail::xavier_fill(L.wk, rng);
    detail::xavier_fill(L.wv, rng);
    detail::xavier_fill(L.wo, rng);
    detail::xavier_fill(L.w1, rng);
    detail::xavier_fill(L.w2, rng);
  }
  detail::xavier_fill(p.w_out, rng);
  return state;
}

template <typename S>
Mat<S> forward_logits(const ModelState<S>& state, const std::vector<int>& tokens,
                      const SoftPrompt<S>* prompt, ForwardCache<S>* cache) {
  const ModelConfig& cfg = state.config;
  const int n = prompt ? prompt->length() : 0;
  const int L = static_cast<int>(tokens.size());
  const int T = n + L;
  const int d = cfg.embed_dim;

  if (prompt && prompt->dim() != d) {
    raise(ErrorCode::DimensionMismatch,
          "prompt dim " + std::to_string(prompt->dim()) +
              " != model embed_dim " + std::to_string(d));
  }
  if (T > cfg.max_len) {
    raise(ErrorCode::SequenceTooLong,
          "prompt+sequence length " + std::to_string(T) + " exceeds max_len " +
              std::to_string(cfg.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      raise(ErrorCode::DimensionMismatch,
            "token id " + std::to_string(t) + " outside vocabulary");
    }
  }

  const auto& p = state.params;
  Mat<S> x(T, d);
  for (int i = 0; i < n; ++i) x.row(i) = prompt->embeddings.row(i);
  for (int j = 0; j < L; ++j) x.row(n + j) = p.tok_emb.row(tokens[j]);
  x += p.pos_emb.topRows(T);

  ForwardCache<S> local;
  ForwardCache<S>& c = cache ? *cache : local;
  c.tokens = tokens;
  c.prompt_len = n;
  c.x0 = x;
  c.layers.assign(static_cast<std::size_t>(cfg.num_layers), {});

  const int H = cfg.num_heads;
  const int dh = d / H;
  const S tau = S(1) / std::sqrt(static_cast<S>(dh));

  for (int l = 0; l < cfg.num_layers; ++l) {
    const auto& w = p.layers[static_cast<std::size_t>(l)];
    auto& lc = c.layers[static_cast<std::size_t>(l)];

    detail::layernorm(x, w.ln1_gamma, w.ln1_beta, lc.ln1);
    const Mat<S>& a = lc.ln1.out;
    lc.attn.a = a;
    lc.attn.q.noalias() = a * w.wq;
    lc.attn.q.rowwise() += w.bq.row(0);
    lc.attn.k.noalias() = a * w.wk;
    lc.attn.k.rowwise() += w.bk.row(0);
    lc.attn.v.noalias() = a * w.wv;
    lc.attn.v.rowwise() += w.bv.row(0);

    lc.attn.probs.assign(static_cast<std::size_t>(H), {});
    lc.attn.concat.resize(T, d);
    for (int h = 0; h < H; ++h) {
      auto qh = lc.attn.q.middleCols(h * dh, dh);
      auto kh = lc.attn.k.middleCols(h * dh, dh);
      auto vh = lc.attn.v.middleCols(h * dh, dh);
      Mat<S> scores = (qh * kh.transpose()) * tau;  // T x T
      Mat<S>& probs = lc.attn.probs[static_cast<std::size_t>(h)];
      probs.resize(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        const S mx = scores.row(i).maxCoeff();
        auto e = (scores.row(i).array() - mx).exp().eval();
        probs.row(i) = e / e.sum();
      }
      lc.attn.concat.middleCols(h * dh, dh).noalias() = probs * vh;
    }

    Mat<S> z = lc.attn.concat * w.wo;
    z.rowwise() += w.bo.row(0);
    lc.x_mid = x + z;

    detail::layernorm(lc.x_mid, w.ln2_gamma, w.ln2_beta, lc.ln2);
    lc.ff_pre.noalias() = lc.ln2.out * w.w1;
    lc.ff_pre.rowwise() += w.b1.row(0);
    lc.ff_act = lc.ff_pre.unaryExpr([](S v) { return detail::gelu(v); });
    Mat<S> f = lc.ff_act * w.w2;
    f.rowwise() += w.b2.row(0);
    lc.x_out = lc.x_mid + f;
    x = lc.x_out;
  }

  detail::layernorm(x, p.lnf_gamma, p.lnf_beta, c.lnf);
  c.logits.noalias() = c.lnf.out * p.w_out;
  c.logits.rowwise() += p.b_out.row(0);
  return c.logits;
}

template <typename S>
void backward(const ModelState<S>& state, const ForwardCache<S>& cache,
              const Mat<S>& dlogits, ParamSet<S>* param_grads,
              Mat<S>* prompt_grad) {
  const ModelConfig& cfg = state.config;
  const auto& p = state.params;
  const int T = static_cast<int>(cache.x0.rows());
  const int d = cfg.embed_dim;
  const int H = cfg.num_heads;
  const int dh = d / H;
  const S tau = S(1) / std::sqrt(static_cast<S>(dh));

  if (dlogits.rows() != T || dlogits.cols() != cfg.vocab_size) {
    raise(ErrorCode::ShapeMismatch, "dlogits shape does not match cache");
  }

  // Output head.
  if (param_grads) {
    param_grads->w_out.noalias() += cache.lnf.out.transpose() * dlogits;
    param_grads->b_out.row(0).array() += dlogits.array().colwise().sum();
  }
  Mat<S> dxf = dlogits * p.w_out.transpose();
  Mat<S> dx = detail::layernorm_backward(
      cache.lnf, p.lnf_gamma, dxf,
      param_grads ? &param_grads->lnf_gamma : nullptr,
      param_grads ? &param_grads->lnf_beta : nullptr);

  for (int l = cfg.num_layers - 1; l >= 0; --l) {
    const auto& w = p.layers[static_cast<std::size_t>(l)];
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    LayerParams<S>* gw =
        param_grads ? &param_grads->layers[static_cast<std::size_t>(l)] : nullptr;

    // FFN block: x_out = x_mid + gelu(ln2(x_mid) w1 + b1) w2 + b2
    const Mat<S>& dxo = dx;
    if (gw) {
      gw->w2.noalias() += lc.ff_act.transpose() * dxo;
      gw->b2.row(0).array() += dxo.array().colwise().sum();
    }
    Mat<S> dh_act = dxo * w.w2.transpose();
    Mat<S> dzp =
        dh_act.array() *
        lc.ff_pre.unaryExpr([](S v) { return detail::gelu_grad(v); }).array();
    if (gw) {
      gw->w1.noalias() += lc.ln2.out.transpose() * dzp;
      gw->b1.row(0).array() += dzp.array().colwise().sum();
    }
    Mat<S> db = dzp * w.w1.transpose();
    Mat<S> dx_mid =
        dxo + detail::layernorm_backward(lc.ln2, w.ln2_gamma, db,
                                         gw ? &gw->ln2_gamma : nullptr,
                                         gw ? &gw->ln2_beta : nullptr);

    // Attention block: x_mid = x_in + (concat_heads) wo + bo
    const Mat<S>& dz = dx_mid;
    if (gw) {
      gw->wo.noalias() += lc.attn.concat.transpose() * dz;
      gw->bo.row(0).array() += dz.array().colwise().sum();
    }
    Mat<S> do_ = dz * w.wo.transpose();

    Mat<S> dq = Mat<S>::Zero(T, d), dk = Mat<S>::Zero(T, d),
           dv = Mat<S>::Zero(T, d);
    for (int h = 0; h < H; ++h) {
      const Mat<S>& probs = lc.attn.probs[static_cast<std::size_t>(h)];
      auto kh = lc.attn.k.middleCols(h * dh, dh);
      auto qh = lc.attn.q.middleCols(h * dh, dh);
      auto vh = lc.attn.v.middleCols(h * dh, dh);
      auto doh = do_.middleCols(h * dh, dh);

      Mat<S> dprobs = doh * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() = probs.transpose() * doh;

      Mat<S> dscores(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        const S dot = dprobs.row(i).dot(probs.row(i));
        dscores.row(i) =
            probs.row(i).array() * (dprobs.row(i).array() - dot);
      }
      dq.middleCols(h * dh, dh).noalias() = dscores * kh * tau;
      dk.middleCols(h * dh, dh).noalias() = dscores.transpose() * qh * tau;
    }

    if (gw) {
      gw->wq.noalias() += lc.attn.a.transpose() * dq;
      gw->bq.row(0).array() += dq.array().colwise().sum();
      gw->wk.noalias() += lc.attn.a.transpose() * dk;
      gw->bk.row(0).array() += dk.array().colwise().sum();
      gw->wv.noalias() += lc.attn.a.transpose() * dv;
      gw->bv.row(0).array() += dv.array().colwise().sum();
    }
    Mat<S> da = dq * w.wq.transpose() + dk * w.wk.transpose() +
                dv * w.wv.transpose();
    dx = dx_mid + detail::layernorm_backward(lc.ln1, w.ln1_gamma, da,
                                             gw ? &gw->ln1_gamma : nullptr,
                                             gw ? &gw->ln1_beta : nullptr);
  }

  const int n = cache.prompt_len;
  if (prompt_grad) {
    prompt_grad->resize(n, d);
    if (n > 0) *prompt_grad = dx.topRows(n);
  }
  if (param_grads) {
    param_grads->pos_emb.topRows(T) += dx;
    for (std::size_t j = 0; j < cache.tokens.size(); ++j) {
      param_grads->tok_emb.row(cache.tokens[j]) +=
          dx.row(n + static_cast<int>(j));
    }
  }
}

template <typename S>
ParamSet<S> zeros_like(const ParamSet<S>& params) {
  ParamSet<S> z = params;
  z.set_zero();
  return z;
}

}  // namespace sage
