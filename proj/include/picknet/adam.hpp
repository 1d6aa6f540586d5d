#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline double global_grad_norm(const std::vector<Param*>& params) {
  double sq = 0.0;
  for (const Param* p : params)
    for (double g : p->grad.data()) sq += g * g;
  return std::sqrt(sq);
}

// Scales all gradients so the global norm does not exceed max_norm.
// max_norm <= 0 disables clipping.
inline void clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (Param* p : params)
    for (double& g : p->grad.data()) g *= scale;
}

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

// Adam with bias correction. Moments are owned here, one pair per param, in
// registration order. step() updates values in place and zeroes gradients.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
      m_.push_back(p->value.rank() == 1 ? Tensor::vector(p->value.rows())
                                        : Tensor::matrix(p->value.rows(), p->value.cols()));
      v_.push_back(m_.back());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param& p = *params_[k];
      if (!p.value.same_shape(p.grad))
        throw ShapeError("adam: param " + p.name + " value " + p.value.shape_str() +
                         " vs grad " + p.grad.shape_str());
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[k][i] / bc1;
        const double vhat = v_[k][i] / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      p.zero_grad();
    }
  }

  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace picknet
