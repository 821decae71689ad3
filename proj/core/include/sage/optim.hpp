#pragma once

#include <cmath>
#include <vector>

#include "sage/errors.hpp"
#include "sage/model.hpp"

namespace sage {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over an arbitrary list of tensors. The caller owns the tensors; the
/// optimizer keeps first/second moment state per tensor and applies
/// bias-corrected updates in place.
template <typename S>
class Adam {
 public:
  explicit Adam(std::vector<Mat<S>*> params, AdamConfig config = {})
      : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Mat<S>* p : params_) {
      m_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      v_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
  }

  void step(const std::vector<Mat<S>*>& grads) {
    if (grads.size() != params_.size()) {
      raise(ErrorCode::ShapeMismatch, "gradient list size does not match");
    }
    ++t_;
    const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(config_.beta1, t_)));
    const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(config_.beta2, t_)));
    const S b1 = static_cast<S>(config_.beta1);
    const S b2 = static_cast<S>(config_.beta2);
    const S lr = static_cast<S>(config_.lr);
    const S eps = static_cast<S>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Mat<S>& p = *params_[i];
      const Mat<S>& g = *grads[i];
      if (g.rows() != p.rows() || g.cols() != p.cols()) {
        raise(ErrorCode::ShapeMismatch, "gradient shape does not match param");
      }
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (S(1) - b2) * g.array().square();
      p.array() -=
          lr * (m_[i].array() * c1) / ((v_[i].array() * c2).sqrt() + eps);
    }
  }

  int steps_taken() const { return t_; }

 private:
  std::vector<Mat<S>*> params_;
  AdamConfig config_;
  std::vector<Mat<S>> m_, v_;
  int t_ = 0;
};

/// Collects pointers to every tensor of a ParamSet in visitor order, for
/// wiring a full model into Adam.
template <typename S>
std::vector<Mat<S>*> tensor_pointers(ParamSet<S>& params) {
  std::vector<Mat<S>*> out;
  params.for_each_tensor(
      [&](const std::string&, Mat<S>& m) { out.push_back(&m); });
  return out;
}

}  // namespace sage
