#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dkt/tensor.hpp"

namespace dkt {

enum class OptimizerKind { sgd, adam };
enum class Schedule { constant, cosine };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 3e-4;
  double weight_decay = 0.01;  // decoupled
  double momentum = 0.9;       // sgd
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

inline double learning_rate_at(Schedule s, double base, std::size_t step, std::size_t total_steps) {
  if (s == Schedule::constant || total_steps == 0) return base;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Scales all grads so their joint L2 norm is at most max_norm. Returns the
/// norm before clipping.
template <class T>
double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm) {
  double sq = 0;
  for (auto& p : params)
    if (p.has_grad())
      for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& p : params)
      if (p.has_grad())
        for (auto& g : p.mutable_grad()) g *= f;
  }
  return norm;
}

/// SGD with momentum or Adam; weight decay is applied decoupled from the
/// gradient update, so a zero-gradient step is a pure contraction.
template <class T>
class Optimizer {
 public:
  Optimizer(std::vector<Tensor<T>> params, OptimizerConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr >= 0)) throw std::invalid_argument("optimizer: lr must be >= 0");
    for (auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      if (cfg_.kind == OptimizerKind::adam) v_.emplace_back(p.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto w = params_[i].mutable_data();
      const bool has = params_[i].has_grad();
      auto g = params_[i].grad();
      auto& m = m_[i];
      const double decay = 1.0 - lr * cfg_.weight_decay;
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = has ? static_cast<double>(g[j]) : 0.0;
        double x = static_cast<double>(w[j]) * decay;
        if (cfg_.kind == OptimizerKind::sgd) {
          m[j] = cfg_.momentum * m[j] + gj;
          x -= lr * m[j];
        } else {
          auto& v = v_[i];
          m[j] = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * gj;
          v[j] = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * gj * gj;
          x -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
        }
        w[j] = static_cast<T>(x);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::vector<Tensor<T>>& params() { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace dkt
