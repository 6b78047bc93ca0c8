#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "darsd/tensor.hpp"

namespace darsd {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares reverse-mode gradients of a scalar function against central
// differences. Returns max |analytic - numeric| / max(1, |analytic|) over every
// coordinate of every input. Inputs must be leaves with requires_grad set;
// their values are restored before returning.
inline double gradient_check(const ScalarFunction& f, std::vector<Tensor> inputs,
                             double eps = 1e-5) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw ContractError("gradient_check: eps must lie in [1e-7, 1e-3]");
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    for (auto& t : inputs) t.zero_grad();
    Tensor loss = f(inputs);
    tape.backward(loss);
    for (auto& t : inputs) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
      t.clear_grad();
    }
  }

  NoGradScope no_grad;
  double worst = 0.0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    auto values = inputs[p].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = f(inputs).item();
      values[i] = orig - eps;
      const double down = f(inputs).item();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace darsd
