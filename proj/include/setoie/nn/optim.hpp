#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "setoie/errors.hpp"
#include "setoie/nn/autograd.hpp"

namespace setoie::nn {

struct AdamConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with decoupled weight decay. Moments live alongside the parameter
// list passed at construction.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0) || cfg_.weight_decay < 0.0)
      throw ConfigError("learning rate must be positive and weight decay non-negative");
    for (const auto& p : params_) {
      first_.emplace_back(p->value.size(), 0.0);
      second_.emplace_back(p->value.size(), 0.0);
    }
  }

  // Applies one update from the parameters' accumulated gradients. Nothing is
  // modified when any gradient is non-finite.
  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (double g : params_[i]->grad())
        if (!std::isfinite(g))
          throw NumericalError("non-finite gradient in parameter " + std::to_string(i));

    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& w = params_[i]->value.data;
      const auto& g = params_[i]->grad();
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * w[j]);
      }
    }
  }

  void zero_grad() { nn::zero_grad(params_); }
  std::size_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<Var> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

}  // namespace setoie::nn
