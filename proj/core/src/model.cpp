#include "sage/model.hpp"

namespace sage {

void ModelConfig::validate() const {
  if (vocab_size <= 0 || embed_dim <= 0 || num_layers <= 0 || num_heads <= 0 ||
      ff_dim <= 0 || max_len <= 0) {
    raise(ErrorCode::InvalidConfig, "model dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) {
    raise(ErrorCode::InvalidConfig,
          "embed_dim " + std::to_string(embed_dim) +
              " not divisible by num_heads " + std::to_string(num_heads));
  }
}

ModelConfig default_model_config() { return ModelConfig{}; }

std::uint64_t param_hash(const ModelState<float>& state) {
  std::uint64_t h = kFnvOffset;
  state.params.for_each_tensor([&](const std::string&, const MatF& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = m(r, c);
        h = fnv1a64(&v, sizeof(v), h);
      }
    }
  });
  return h;
}

namespace {

template <typename To, typename From>
ModelState<To> cast_state(const ModelState<From>& in) {
  ModelState<To> out;
  out.config = in.config;
  out.params.layers.resize(in.params.layers.size());
  std::vector<const Mat<From>*> src;
  in.params.for_each_tensor(
      [&](const std::string&, const Mat<From>& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.params.for_each_tensor([&](const std::string&, Mat<To>& m) {
    m = src[i++]->template cast<To>();
  });
  return out;
}

}  // namespace

ModelState<double> to_double(const ModelState<float>& state) {
  return cast_state<double, float>(state);
}

ModelState<float> to_float(const ModelState<double>& state) {
  return cast_state<float, double>(state);
}

}  // namespace sage
