#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "snapture/nn/tensor.hpp"

namespace snapture::nn {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD (theta -= lr * g) or bias-corrected Adam over a fixed parameter list.
template <typename Scalar> class Optimizer {
public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  }

  const OptimizerConfig &config() const noexcept { return cfg_; }
  long steps() const noexcept { return steps_; }
  const std::vector<Tensor<Scalar>> &first_moments() const noexcept { return m_; }
  const std::vector<Tensor<Scalar>> &second_moments() const noexcept { return v_; }

  void step(std::span<Parameter<Scalar> *const> params) {
    if (cfg_.kind == OptimizerKind::adam && m_.empty()) {
      for (const auto *p : params) {
        m_.push_back(Tensor<Scalar>::zeros_like(p->value));
        v_.push_back(Tensor<Scalar>::zeros_like(p->value));
      }
    }
    if (cfg_.kind == OptimizerKind::adam && m_.size() != params.size())
      throw ShapeError("optimizer state tracks " + std::to_string(m_.size()) +
                       " parameters, step got " + std::to_string(params.size()));
    ++steps_;
    const double lr = cfg_.learning_rate;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<Scalar> &p = *params[k];
      if (p.grad.shape() != p.value.shape())
        throw ShapeError("gradient shape mismatch for parameter " + p.name);
      if (cfg_.kind == OptimizerKind::sgd) {
        p.value.values() -= static_cast<Scalar>(lr) * p.grad.values();
        continue;
      }
      if (m_[k].shape() != p.value.shape())
        throw ShapeError("optimizer moment shape mismatch for parameter " + p.name);
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
      auto *m = m_[k].data();
      auto *v = v_[k].data();
      auto *theta = p.value.data();
      const auto *g = p.grad.data();
      for (Index i = 0; i < p.value.size(); ++i) {
        const double gi = g[i];
        const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<Scalar>(mi);
        v[i] = static_cast<Scalar>(vi);
        theta[i] = static_cast<Scalar>(theta[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.epsilon));
      }
    }
  }

private:
  OptimizerConfig cfg_;
  long steps_ = 0;
  std::vector<Tensor<Scalar>> m_;
  std::vector<Tensor<Scalar>> v_;
};

} // namespace snapture::nn
