#pragma once

#include <cmath>
#include <vector>

#include "darsd/networks.hpp"

namespace darsd {

// Adaptive-moment gradient descent over a fixed parameter list.
class Adam {
 public:
  Adam(ParamList params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }

  const ParamList& params() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.value.clear_grad();
  }

  // Parameters with no gradient buffer are treated as having zero gradient.
  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k].value;
      auto g = p.grad();
      auto w = p.mutable_data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g.empty() ? 0.0 : g[i];
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * gi;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * gi * gi;
        w[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
  }

 private:
  ParamList params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

}  // namespace darsd
