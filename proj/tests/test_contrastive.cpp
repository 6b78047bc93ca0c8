#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "darsd/contrastive.hpp"
#include "darsd/gradcheck.hpp"
#include "oracles.hpp"

using namespace darsd;

using oracle::anti_ref;
using oracle::rows_of;
using oracle::self_ref;
using oracle::sup_ref;

TEST(ContrastiveOracle, SupervisedMatchesDoubleLoop) {
  Rng rng(100);
  for (int batch = 0; batch < 50; ++batch) {
    const std::size_t n = 4 + rng.index(13), d = 2 + rng.index(31);
    const double tau = rng.uniform(0.05, 2.0);
    Tensor f = rng.normal_tensor({n, d});
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = rng.index(3);
    y[0] = 0, y[1] = 0, y[2] = 1;  // at least one valid anchor
    EXPECT_NEAR(supervised_contrastive_loss(f, y, tau).item(), sup_ref(rows_of(f), y, tau), 1e-9)
        << "batch " << batch;
  }
}

TEST(ContrastiveOracle, SelfConsistencyMatchesDoubleLoop) {
  Rng rng(101);
  for (int batch = 0; batch < 50; ++batch) {
    const std::size_t k = 2 + rng.index(15), d = 2 + rng.index(31);
    const double tau = rng.uniform(0.05, 2.0);
    Tensor f = rng.normal_tensor({k, d}), a = rng.normal_tensor({k, d});
    EXPECT_NEAR(self_consistency_loss(f, a, tau).item(), self_ref(rows_of(f), rows_of(a), tau),
                1e-9);
  }
}

TEST(ContrastiveOracle, AntiDivergenceMatchesDoubleLoop) {
  Rng rng(102);
  for (int batch = 0; batch < 50; ++batch) {
    const std::size_t k = 1 + rng.index(16), ns = 1 + rng.index(16), d = 2 + rng.index(31);
    const double tau = rng.uniform(0.05, 2.0);
    Tensor f = rng.normal_tensor({k, d}), s = rng.normal_tensor({ns, d});
    EXPECT_NEAR(anti_divergence_loss(f, s, tau).item(), anti_ref(rows_of(f), rows_of(s), tau),
                1e-9);
  }
}

TEST(SupervisedContrastive, TwoClassClosedForm) {
  // a1 = a2 = e1, b = e2: anchors a1 and a2 each see one positive (cos 1) and one
  // negative (cos 0); b has no positive and is skipped.
  Tensor f({3, 2}, {1.0, 0.0, 1.0, 0.0, 0.0, 1.0});
  const double tau = 0.5;
  EXPECT_NEAR(supervised_contrastive_loss(f, {0, 0, 1}, tau).item(), -1.0 / tau, 1e-14);
}

TEST(SupervisedContrastive, DegenerateBatchesRejected) {
  Tensor f({3, 2}, {1.0, 0.0, 0.5, 0.5, 0.0, 1.0});
  EXPECT_THROW(supervised_contrastive_loss(f, {1, 1, 1}, 0.1), ContractError);
  EXPECT_THROW(supervised_contrastive_loss(f, {0, 1, 2}, 0.1), ContractError);
  EXPECT_THROW(supervised_contrastive_loss(f, {0, 1}, 0.1), ShapeError);
  EXPECT_THROW(supervised_contrastive_loss(f, {0, 0, 1}, 0.0), ContractError);
}

TEST(SelfConsistency, SingleDistrustedFeatureIsZero) {
  Tensor f({1, 3}, {1.0, 2.0, 3.0});
  EXPECT_EQ(self_consistency_loss(f, f, 0.1).item(), 0.0);
  EXPECT_THROW(self_consistency_loss(f, Tensor::zeros({2, 3}), 0.1), ShapeError);
}

TEST(SelfConsistency, OrthogonalPairClosedForm) {
  // Each view equals its anchor (cos 1); the one negative is orthogonal (cos 0).
  Tensor f({2, 2}, {1.0, 0.0, 0.0, 1.0});
  EXPECT_NEAR(self_consistency_loss(f, f, 0.25).item(), -4.0, 1e-14);
}

TEST(AntiDivergence, EmptyDistrustedIsZeroAndTwoAnchorCase) {
  Tensor src({2, 2}, {1.0, 0.0, -1.0, 0.0});
  EXPECT_EQ(anti_divergence_loss(Tensor::zeros({0, 2}), src, 0.1).item(), 0.0);
  // A feature orthogonal to both anchors: both logits zero, loss ln 2.
  EXPECT_NEAR(anti_divergence_loss(Tensor({1, 2}, {0.0, 3.0}), src, 0.1).item(), std::log(2.0),
              1e-14);
  EXPECT_THROW(anti_divergence_loss(Tensor({1, 2}, {0.0, 1.0}), Tensor::zeros({0, 2}), 0.1),
               ContractError);
  EXPECT_THROW(anti_divergence_loss(Tensor({1, 3}, {0.0, 1.0, 2.0}), src, 0.1), ShapeError);
}

TEST(AntiDivergence, NearestAnchorByCosineWithLowestIndexTie) {
  Tensor src({4, 2}, {10.0, 0.0, 0.0, 1.0, 0.0, 5.0, -1.0, 0.0});
  const std::vector<double> up{0.0, 2.0}, right{0.1, 0.0}, left{-3.0, 0.1};
  EXPECT_EQ(nearest_source_anchor(up, src), 1u);  // rows 1 and 2 tie exactly
  EXPECT_EQ(nearest_source_anchor(right, src), 0u);
  EXPECT_EQ(nearest_source_anchor(left, src), 3u);
  EXPECT_THROW(nearest_source_anchor(up, Tensor::zeros({0, 2})), ContractError);
}

TEST(ContrastiveInvariance, PermutationAndScale) {
  Rng rng(103);
  Tensor f = rng.normal_tensor({8, 5});
  std::vector<std::size_t> y{0, 1, 2, 0, 1, 2, 0, 1};
  const double base = supervised_contrastive_loss(f, y, 0.3).item();

  const std::vector<std::size_t> perm{7, 2, 5, 0, 3, 6, 1, 4};
  std::vector<std::size_t> yp;
  for (auto p : perm) yp.push_back(y[p]);
  EXPECT_NEAR(supervised_contrastive_loss(gather_rows(f, perm), yp, 0.3).item(), base, 1e-12);

  std::vector<double> scaled = f.values();
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 1.0 + static_cast<double>(i / 5);
  EXPECT_NEAR(supervised_contrastive_loss(Tensor(f.shape(), scaled), y, 0.3).item(), base, 1e-12);

  Tensor s = rng.normal_tensor({6, 5});
  const double anti = anti_divergence_loss(f, s, 0.3).item();
  EXPECT_NEAR(anti_divergence_loss(gather_rows(f, perm), s, 0.3).item(), anti, 1e-12);
  EXPECT_NEAR(anti_divergence_loss(mul(f, 4.0), mul(s, 0.25), 0.3).item(), anti, 1e-12);
}

TEST(ContrastiveStability, FiniteAcrossTemperatures) {
  Rng rng(104);
  Tensor f = rng.normal_tensor({10, 6}), s = rng.normal_tensor({7, 6});
  std::vector<std::size_t> y{0, 1, 0, 1, 0, 1, 2, 2, 2, 0};
  for (double tau : {1e-3, 0.01, 0.1, 1.0, 100.0}) {
    EXPECT_TRUE(std::isfinite(supervised_contrastive_loss(f, y, tau).item())) << tau;
    EXPECT_TRUE(std::isfinite(self_consistency_loss(f, f, tau).item())) << tau;
    EXPECT_TRUE(std::isfinite(anti_divergence_loss(f, s, tau).item())) << tau;
  }
}

TEST(ContrastiveGradients, AllThreeLossesPassGradientCheck) {
  Rng rng(105);
  Tensor f = rng.normal_tensor({6, 4}, 1.0, true);
  Tensor a = rng.normal_tensor({6, 4}, 1.0, true);
  Tensor s = rng.normal_tensor({5, 4}, 1.0, true);
  const std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
  EXPECT_LT(gradient_check([&](const std::vector<Tensor>& in) {
              return supervised_contrastive_loss(in[0], y, 0.5);
            }, {f}, 1e-5), 1e-4);
  EXPECT_LT(gradient_check([&](const std::vector<Tensor>& in) {
              return self_consistency_loss(in[0], in[1], 0.5);
            }, {f, a}, 1e-5), 1e-4);
  EXPECT_LT(gradient_check([&](const std::vector<Tensor>& in) {
              return anti_divergence_loss(in[0], in[1], 0.5);
            }, {f, s}, 1e-5), 1e-4);
}

TEST(Augment, IdentityPolicyAndDeterminism) {
  Rng rng(106);
  Tensor x = rng.normal_tensor({3, 8, 2});
  Rng r0(1);
  EXPECT_EQ(augment(x, {0.0, 1.0, 1.0}, r0).values(), x.values());

  Rng a(5), b(5);
  AugmentationPolicy p{0.1, 0.8, 1.2};
  EXPECT_EQ(augment(x, p, a).values(), augment(x, p, b).values());
  EXPECT_THROW(augment(x, {0.1, 1.2, 0.8}, a), ContractError);
  EXPECT_THROW(augment(x, {-0.1, 0.8, 1.2}, a), ContractError);
}

TEST(Augment, MonteCarloMeanMatchesScaleMidpoint) {
  // E[scale * x + noise] = 1.0 * x for the symmetric range.
  Tensor x = Tensor::full({20000, 1}, 2.0);
  Rng rng(107);
  Tensor y = augment(x, {0.1, 0.8, 1.2}, rng);
  double mean = 0.0;
  for (double v : y.data()) mean += v / 20000.0;
  EXPECT_NEAR(mean, 2.0, 0.01);
}

TEST(TotalLoss, WeightedSumAndNonFiniteTerm) {
  LossComponents c{Tensor::scalar(1.5), Tensor::scalar(-0.25), Tensor::scalar(2.0),
                   Tensor::scalar(0.75)};
  TotalLoss tl = total_loss(c, 0.5, 0.2);
  EXPECT_NEAR(tl.total.item(), 1.5 - 0.25 + 0.5 * 2.0 + 0.2 * 0.75, 1e-15);
  EXPECT_EQ(tl.terms.l_total, tl.total.item());
  EXPECT_EQ(tl.terms.l_anti, 2.0);
  EXPECT_EQ(tl.terms.lambda2, 0.2);

  c.anti = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
  try {
    total_loss(c, 0.5, 0.5);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.term(), "l_anti");
  }
  c.anti = Tensor::zeros({2});
  EXPECT_THROW(total_loss(c, 0.5, 0.5), ContractError);
}
