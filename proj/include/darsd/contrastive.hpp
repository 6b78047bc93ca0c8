#pragma once

// Hybrid contrastive optimization: supervised aggregation over labeled and
// confidently pseudo-labeled features, self-consistency for distrusted target
// features, anti-divergence toward nearest source anchors, and the weighted
// total objective.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "darsd/ops.hpp"
#include "darsd/rng.hpp"
#include "darsd/tensor.hpp"

namespace darsd {

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& term, double value)
      : std::runtime_error("non-finite loss term " + term + " = " + std::to_string(value)),
        term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

namespace detail {

inline void require_positive_tau(double tau) {
  if (!(tau > 0.0)) throw ContractError("contrastive temperature must be > 0");
}

// mean_i [ logsumexp-style denominator_i - positive_i ] restricted to rows with
// nonzero weight; weights carry 1/|valid|.
inline Tensor weighted_rows(const Tensor& per_row, std::vector<double> weights) {
  return sum(mul(per_row, Tensor::vector(std::move(weights))));
}

// log sum_j mask_ij exp(logits_ij), with logits bounded above by 1/tau; the
// shift keeps exp from overflowing at small temperatures.
inline Tensor masked_log_sum_exp(const Tensor& logits, const Tensor& mask, double tau) {
  const double top = 1.0 / tau;
  Tensor s = exp(add(logits, -top));
  if (mask.defined()) s = mul(s, mask);
  return add(log(sum(s, 1), std::numeric_limits<double>::min()), top);
}

}  // namespace detail

// For each anchor i: mean over positives p of
//   -log( exp(cos(i,p)/tau) / sum_{n in N(i)} exp(cos(i,n)/tau) ),
// N(i) holding only different-class samples. Anchors without positives or
// without negatives are skipped; if every anchor is skipped the batch is
// degenerate and rejected.
inline Tensor supervised_contrastive_loss(const Tensor& feats,
                                          const std::vector<std::size_t>& labels,
                                          double tau) {
  detail::require_positive_tau(tau);
  if (feats.rank() != 2 || feats.dim(0) != labels.size()) {
    throw ShapeError("supervised_contrastive_loss: features " + shape_str(feats.shape()) +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = labels.size();
  std::vector<double> pos_w(n * n, 0.0), neg_mask(n * n, 0.0), anchor_w(n, 0.0);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) ++pos; else ++neg;
    }
    if (pos == 0 || neg == 0) continue;
    ++valid;
    anchor_w[i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) pos_w[i * n + j] = 1.0 / static_cast<double>(pos);
      else neg_mask[i * n + j] = 1.0;
    }
  }
  if (valid == 0) {
    throw ContractError("supervised_contrastive_loss: degenerate batch, no anchor has "
                        "both a positive and a negative");
  }
  for (double& w : anchor_w) w /= static_cast<double>(valid);
  // Skipped anchors get a dummy all-ones denominator row so log stays finite.
  for (std::size_t i = 0; i < n; ++i)
    if (anchor_w[i] == 0.0)
      for (std::size_t j = 0; j < n; ++j) neg_mask[i * n + j] = 1.0;

  Tensor logits = mul(cosine_similarity(feats, feats), 1.0 / tau);
  Tensor denom = detail::masked_log_sum_exp(logits, Tensor({n, n}, neg_mask), tau);
  Tensor positive = sum(mul(logits, Tensor({n, n}, pos_w)), 1);
  return detail::weighted_rows(sub(denom, positive), anchor_w);
}

// mean_i -log( exp(cos(f_i, f_i+)/tau) / sum_{j != i} exp(cos(f_i, f_j)/tau) ),
// negatives drawn from the non-augmented distrusted features only. Fewer than
// two distrusted features leave no negatives and contribute zero.
inline Tensor self_consistency_loss(const Tensor& dis, const Tensor& dis_aug, double tau) {
  detail::require_positive_tau(tau);
  if (dis.rank() != 2 || dis.shape() != dis_aug.shape()) {
    throw ShapeError("self_consistency_loss: views " + shape_str(dis.shape()) + " and " +
                     shape_str(dis_aug.shape()));
  }
  const std::size_t k = dis.dim(0);
  if (k < 2) return Tensor::scalar(0.0);
  std::vector<double> diag(k * k, 0.0), off(k * k, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    diag[i * k + i] = 1.0;
    off[i * k + i] = 0.0;
  }
  Tensor positive = sum(mul(cosine_similarity(dis, dis_aug), Tensor({k, k}, diag)), 1);
  Tensor logits = mul(cosine_similarity(dis, dis), 1.0 / tau);
  Tensor denom = detail::masked_log_sum_exp(logits, Tensor({k, k}, off), tau);
  return mean(sub(denom, mul(positive, 1.0 / tau)));
}

// Index of the source row with maximal cosine similarity; ties -> lowest index.
inline std::size_t nearest_source_anchor(std::span<const double> feat, const Tensor& source) {
  if (source.rank() != 2 || source.dim(0) == 0) {
    throw ContractError("nearest_source_anchor: empty source set");
  }
  if (source.dim(1) != feat.size()) {
    throw ShapeError("nearest_source_anchor: feature length " + std::to_string(feat.size()) +
                     " vs source " + shape_str(source.shape()));
  }
  NoGradScope no_grad;
  Tensor sims = cosine_similarity(Tensor({1, feat.size()}, {feat.begin(), feat.end()}), source);
  std::size_t best = 0;
  for (std::size_t j = 1; j < sims.size(); ++j)
    if (sims[j] > sims[best]) best = j;
  return best;
}

// mean_i -log( exp(cos(f_i, PS(f_i))/tau) / sum_j exp(cos(f_i, s_j)/tau) ),
// PS the nearest source anchor and the denominator over every source row.
// An empty distrusted set contributes zero.
inline Tensor anti_divergence_loss(const Tensor& dis, const Tensor& source, double tau) {
  detail::require_positive_tau(tau);
  if (dis.rank() != 2 || source.rank() != 2 || (dis.dim(0) > 0 && dis.dim(1) != source.dim(1))) {
    throw ShapeError("anti_divergence_loss: distrusted " + shape_str(dis.shape()) +
                     " vs source " + shape_str(source.shape()));
  }
  const std::size_t k = dis.dim(0);
  if (k == 0) return Tensor::scalar(0.0);
  const std::size_t ns = source.dim(0);
  if (ns == 0) throw ContractError("anti_divergence_loss: empty source set");
  std::vector<double> anchor(k * ns, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = dis.data().subspan(i * dis.dim(1), dis.dim(1));
    anchor[i * ns + nearest_source_anchor(row, source)] = 1.0;
  }
  Tensor logits = mul(cosine_similarity(dis, source), 1.0 / tau);
  Tensor denom = detail::masked_log_sum_exp(logits, Tensor{}, tau);
  Tensor positive = sum(mul(logits, Tensor({k, ns}, std::move(anchor))), 1);
  return mean(sub(denom, positive));
}

struct AugmentationPolicy {
  double jitter_sigma = 0.1;
  double scale_low = 0.8;
  double scale_high = 1.2;
};

// Per-sample magnitude scaling plus Gaussian jitter on a [batch x ...] input.
// The result is a constant: augmentation does not participate in autodiff.
inline Tensor augment(const Tensor& x, const AugmentationPolicy& policy, Rng& rng) {
  if (policy.scale_low > policy.scale_high || policy.jitter_sigma < 0.0) {
    throw ContractError("augment: invalid policy");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const std::size_t rows = x.rank() == 0 ? 1 : x.dim(0);
  const std::size_t stride = rows == 0 ? 0 : out.size() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    const double scale = policy.scale_low == policy.scale_high
                             ? policy.scale_low
                             : rng.uniform(policy.scale_low, policy.scale_high);
    for (std::size_t i = 0; i < stride; ++i) {
      double& v = out[r * stride + i];
      v *= scale;
      if (policy.jitter_sigma > 0.0) v += policy.jitter_sigma * rng.normal();
    }
  }
  return Tensor(x.shape(), std::move(out));
}

struct LossTerms {
  double l_sup = 0.0;
  double l_self = 0.0;
  double l_anti = 0.0;
  double l_adv = 0.0;
  double l_total = 0.0;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
};

struct LossComponents {
  Tensor sup;
  Tensor self;
  Tensor anti;
  Tensor adv;
};

struct TotalLoss {
  Tensor total;  // l_sup + l_self + lambda1 l_anti + lambda2 l_adv
  LossTerms terms;
};

inline TotalLoss total_loss(const LossComponents& c, double lambda1, double lambda2) {
  const std::pair<const char*, const Tensor*> named[] = {
      {"l_sup", &c.sup}, {"l_self", &c.self}, {"l_anti", &c.anti}, {"l_adv", &c.adv}};
  for (const auto& [name, t] : named) {
    if (!t->defined() || t->size() != 1) {
      throw ContractError(std::string("total_loss: ") + name + " is not a scalar");
    }
    if (!std::isfinite(t->item())) throw NonFiniteLossError(name, t->item());
  }
  Tensor total = add(add(c.sup, c.self), add(mul(c.anti, lambda1), mul(c.adv, lambda2)));
  LossTerms terms{c.sup.item(), c.self.item(), c.anti.item(), c.adv.item(),
                  total.item(), lambda1,       lambda2};
  return {total, terms};
}

}  // namespace darsd
