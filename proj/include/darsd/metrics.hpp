#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "darsd/tensor.hpp"

namespace darsd {

// counts[truth * n_c + pred]
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& pred,
                                        const std::vector<std::size_t>& truth,
                                        std::size_t classes) {
  if (pred.size() != truth.size()) {
    throw ContractError("confusion_matrix: " + std::to_string(pred.size()) +
                        " predictions vs " + std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= classes || truth[i] >= classes) {
      throw ContractError("confusion_matrix: class index out of range");
    }
    ++cm.counts[truth[i] * classes + pred[i]];
  }
  return cm;
}

// F1 per class; a class with no support and no predictions scores 0.
inline std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  std::vector<double> f1(cm.classes, 0.0);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    std::size_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (std::size_t k = 0; k < cm.classes; ++k) {
      if (k == c) continue;
      fp += cm.at(k, c);
      fn += cm.at(c, k);
    }
    const std::size_t denom = 2 * tp + fp + fn;
    f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

// Unweighted mean of per-class F1 over all n_c classes.
inline double macro_f1(const std::vector<std::size_t>& pred,
                       const std::vector<std::size_t>& truth, std::size_t classes) {
  const auto f1 = per_class_f1(confusion_matrix(pred, truth, classes));
  double s = 0.0;
  for (double v : f1) s += v;
  return classes == 0 ? 0.0 : s / static_cast<double>(classes);
}

inline double accuracy(const std::vector<std::size_t>& pred,
                       const std::vector<std::size_t>& truth) {
  if (pred.size() != truth.size()) throw ContractError("accuracy: length mismatch");
  if (pred.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace darsd
