#pragma once

// Prototypical pseudo-labeling with confidence evaluation: momentum class
// centroids over reconstructed source features, cosine pseudo-labels for the
// target batch, the confidence-ratio curriculum, and the confident/distrusted
// split.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "darsd/tensor.hpp"

namespace darsd {

struct PseudoLabels {
  std::vector<std::size_t> labels;
  std::vector<double> scores;  // sigma_i = max_c cos(f_i, p_c)
};

class Prototypes {
 public:
  Prototypes(std::size_t classes, std::size_t dim, double momentum)
      : classes_(classes), dim_(dim), momentum_(momentum),
        centroids_(classes * dim, 0.0), initialized_(classes, false) {
    if (momentum < 0.0 || momentum > 1.0) {
      throw ContractError("prototype momentum must lie in [0, 1]");
    }
  }

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }
  double momentum() const { return momentum_; }
  bool initialized(std::size_t c) const { return initialized_.at(c); }
  bool all_initialized() const {
    return std::all_of(initialized_.begin(), initialized_.end(), [](bool b) { return b; });
  }
  std::span<const double> centroid(std::size_t c) const {
    return std::span<const double>(centroids_).subspan(c * dim_, dim_);
  }
  void set_centroid(std::size_t c, std::span<const double> values) {
    std::copy(values.begin(), values.end(), centroids_.begin() + static_cast<std::ptrdiff_t>(c * dim_));
    initialized_[c] = true;
  }

  // p_c <- mu p_c + (1 - mu) mean{f_i : y_i = c}. The first batch containing
  // class c sets p_c to its class mean; absent classes are left untouched.
  // Only values are read: prototypes are statistics, not gradient paths.
  void update(const Tensor& features, const std::vector<std::size_t>& labels) {
    if (features.rank() != 2 || features.dim(1) != dim_ || features.dim(0) != labels.size()) {
      throw ShapeError("update_prototypes: features " + shape_str(features.shape()) +
                       " vs " + std::to_string(labels.size()) + " labels, dim " +
                       std::to_string(dim_));
    }
    std::vector<double> sums(classes_ * dim_, 0.0);
    std::vector<std::size_t> counts(classes_, 0);
    auto f = features.data();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t c = labels[i];
      if (c >= classes_) {
        throw ContractError("update_prototypes: label " + std::to_string(c) +
                            " out of range");
      }
      ++counts[c];
      for (std::size_t j = 0; j < dim_; ++j) sums[c * dim_ + j] += f[i * dim_ + j];
    }
    for (std::size_t c = 0; c < classes_; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < dim_; ++j) {
        const double batch_mean = sums[c * dim_ + j] * inv;
        double& p = centroids_[c * dim_ + j];
        p = initialized_[c] ? momentum_ * p + (1.0 - momentum_) * batch_mean : batch_mean;
      }
      initialized_[c] = true;
    }
  }

  // Argmax cosine similarity against every centroid; ties keep the lowest class.
  PseudoLabels assign(const Tensor& features) const {
    if (!all_initialized()) {
      throw ContractError("assign_pseudo_labels: a class prototype is uninitialized");
    }
    if (features.rank() != 2 || features.dim(1) != dim_) {
      throw ShapeError("assign_pseudo_labels: features " + shape_str(features.shape()) +
                       " vs prototype dim " + std::to_string(dim_));
    }
    std::vector<double> pnorm(classes_);
    for (std::size_t c = 0; c < classes_; ++c) {
      double s = 0.0;
      for (double v : centroid(c)) s += v * v;
      pnorm[c] = std::sqrt(s);
      if (!(pnorm[c] > 0.0)) {
        throw DegenerateVectorError("prototype " + std::to_string(c) + " has zero norm");
      }
    }
    const std::size_t n = features.dim(0);
    PseudoLabels out{std::vector<std::size_t>(n, 0), std::vector<double>(n, 0.0)};
    auto f = features.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = f.data() + i * dim_;
      double xn = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) xn += x[j] * x[j];
      xn = std::sqrt(xn);
      if (!(xn > 0.0)) {
        throw DegenerateVectorError("assign_pseudo_labels: feature " + std::to_string(i) +
                                    " has zero norm");
      }
      for (std::size_t c = 0; c < classes_; ++c) {
        const auto p = centroid(c);
        double dot = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) dot += x[j] * p[j];
        const double cos = dot / (xn * pnorm[c]);
        if (c == 0 || cos > out.scores[i]) {
          out.scores[i] = cos;
          out.labels[i] = c;
        }
      }
    }
    return out;
  }

 private:
  std::size_t classes_;
  std::size_t dim_;
  double momentum_;
  std::vector<double> centroids_;
  std::vector<bool> initialized_;
};

enum class ScheduleMode { linear, stepwise };

// eta(t): the fraction (or threshold) governing confident admission.
struct ConfidenceSchedule {
  double eta0 = 0.1;
  double eta_max = 0.95;
  std::size_t total_steps = 1;
  ScheduleMode mode = ScheduleMode::linear;
  double step_size = 0.05;
  std::size_t step_every = 15;

  void validate() const {
    if (!(0.0 <= eta0 && eta0 <= eta_max && eta_max <= 1.0)) {
      throw ContractError("confidence schedule needs 0 <= eta0 <= eta_max <= 1");
    }
    if (total_steps == 0 || step_every == 0 || step_size < 0.0) {
      throw ContractError("confidence schedule needs positive step counts");
    }
  }

  double ratio(std::size_t t) const {
    double eta = eta0;
    if (mode == ScheduleMode::linear) {
      eta = eta0 + static_cast<double>(t) / static_cast<double>(total_steps) * (eta_max - eta0);
    } else {
      eta = eta0 + step_size * static_cast<double>(t / step_every);
    }
    return std::clamp(eta, eta0, eta_max);
  }
};

inline double confidence_ratio(const ConfidenceSchedule& schedule, std::size_t t) {
  return schedule.ratio(t);
}

enum class PartitionMode { quantile, threshold };

// ceil(eta * n), tolerant of representation error in eta (0.3 * 10 is 3).
inline std::size_t confident_count(double eta, std::size_t n) {
  const double raw = eta * static_cast<double>(n);
  const auto count = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
  return std::min(count, n);
}

struct PartitionedTarget {
  std::vector<std::size_t> confident;   // batch indices, in descending sigma
  std::vector<std::size_t> pseudo_labels;  // aligned with `confident`
  std::vector<double> confident_scores;
  std::vector<std::size_t> distrusted;  // ascending batch index
};

// Quantile mode admits the ceil(eta * n) highest-sigma samples (ties by index);
// threshold mode admits every sample with sigma >= eta.
inline PartitionedTarget partition(const PseudoLabels& pl, double eta,
                                   PartitionMode mode = PartitionMode::quantile) {
  const std::size_t n = pl.scores.size();
  if (pl.labels.size() != n) throw ContractError("partition: labels/scores misaligned");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pl.scores[a] > pl.scores[b];
  });
  std::size_t keep = 0;
  if (mode == PartitionMode::quantile) {
    keep = confident_count(eta, n);
  } else {
    while (keep < n && pl.scores[order[keep]] >= eta) ++keep;
  }
  PartitionedTarget out;
  std::vector<bool> is_confident(n, false);
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t i = order[k];
    is_confident[i] = true;
    out.confident.push_back(i);
    out.pseudo_labels.push_back(pl.labels[i]);
    out.confident_scores.push_back(pl.scores[i]);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!is_confident[i]) out.distrusted.push_back(i);
  return out;
}

}  // namespace darsd
