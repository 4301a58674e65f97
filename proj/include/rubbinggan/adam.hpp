#pragma once

// Adam optimizer over a network's parameter list. Moment buffers are
// keyed by parameter order, which is stable for a given spec.

#include <cmath>
#include <cstdint>
#include <vector>

#include "rubbinggan/layers.hpp"

namespace rubbinggan {

class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 0.0002, double beta1 = 0.5, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<Param*>& params) {
    m_.clear();
    v_.clear();
    for (const Param* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
    t_ = 0;
  }

  void step(const std::vector<Param*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
        p.value[j] -=
            lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
      }
    }
  }

  double lr() const { return lr_; }
  uint64_t steps() const { return t_; }

  // checkpoint access
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  uint64_t& step_counter() { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace rubbinggan
