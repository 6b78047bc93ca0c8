#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "darsd/gradcheck.hpp"
#include "darsd/lcib.hpp"

using namespace darsd;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at(i, j);
  return m;
}

// Largest principal angle between the column spans of two orthonormal bases.
double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  const double smallest = svd.singularValues().minCoeff();
  return std::acos(std::min(1.0, smallest));
}

// Orthonormal d x d matrix from a Householder QR of a Gaussian matrix.
Eigen::MatrixXd random_orthogonal(std::size_t d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  std::vector<double> v(m.rows() * m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, v);
}

}  // namespace

TEST(Basis, RandomIsOrthonormalAndRequiresMBelowD) {
  Rng rng(1);
  InvariantBasis b = InvariantBasis::random(16, 4, rng);
  EXPECT_LT(orthonormality_defect(b), 1e-12);
  EXPECT_TRUE(b.B.requires_grad());
  EXPECT_THROW(InvariantBasis::random(4, 4, rng), ContractError);
  EXPECT_THROW(InvariantBasis::random(4, 0, rng), ContractError);
}

TEST(Project, ColumnGivesOneHotAndComplementGivesZero) {
  Rng rng(2);
  const Eigen::MatrixXd q = random_orthogonal(8, rng);
  InvariantBasis b{from_eigen(q.leftCols(3))};
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor col = from_eigen(q.col(static_cast<Eigen::Index>(k)).transpose());
    Tensor w = project(b, col);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(w[j], j == k ? 1.0 : 0.0, 1e-12);
  }
  Tensor perp = from_eigen((q.col(5) - 2.0 * q.col(7)).transpose());
  const Tensor off = project(b, perp);
  for (double v : off.data()) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_THROW(project(b, Tensor::zeros({1, 7})), ShapeError);
}

TEST(Project, RecoversInvariantCoordinatesAndSpanRoundTrip) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd q = random_orthogonal(12, rng);
    InvariantBasis b{from_eigen(q.leftCols(4))};
    Eigen::VectorXd w(4), v(8);
    for (auto& x : w) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const Eigen::VectorXd f_in = q.leftCols(4) * w;
    const Eigen::VectorXd f = f_in + q.rightCols(8) * v;
    Tensor got = project(b, from_eigen(f.transpose()));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got[j], w(j), 1e-10);
    Tensor back = reconstruct(b, project(b, from_eigen(f_in.transpose())));
    for (std::size_t r = 0; r < 12; ++r) EXPECT_NEAR(back[r], f_in(r), 1e-10);
  }
}

TEST(RegularizeCoords, UniformPeakedAndOrderPreserving) {
  Tensor u = regularize_coords(Tensor({1, 4}, {2.0, 2.0, 2.0, 2.0}));
  for (double v : u.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  Tensor p = regularize_coords(Tensor({1, 4}, {10.0, 0.0, 0.0, 0.0}));
  EXPECT_GT(p[0], 0.999);

  Rng rng(4);
  Tensor w = rng.normal_tensor({100, 6}, 2.0);
  Tensor s = regularize_coords(w);
  for (std::size_t i = 0; i < 100; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      row += s.at(i, j);
      for (std::size_t k = 0; k < 6; ++k) {
        if (w.at(i, j) < w.at(i, k)) {
          EXPECT_LT(s.at(i, j), s.at(i, k));
        }
      }
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
}

TEST(Reconstruct, BasisColumnZeroAndMatmulOracle) {
  Rng rng(5);
  InvariantBasis b = InvariantBasis::random(10, 3, rng);
  Tensor e1({1, 3}, {0.0, 1.0, 0.0});
  Tensor col = reconstruct(b, e1);
  for (std::size_t r = 0; r < 10; ++r) EXPECT_NEAR(col[r], b.B.at(r, 1), 1e-15);
  const Tensor zero = reconstruct(b, Tensor::zeros({2, 3}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);

  Tensor w = rng.uniform_tensor({5, 3}, 0.0, 1.0);
  Tensor f = reconstruct(b, w);
  const Eigen::MatrixXd ref = to_eigen(w) * to_eigen(b.B).transpose();
  const Eigen::MatrixXd bb = to_eigen(b.B);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t r = 0; r < 10; ++r) EXPECT_NEAR(f.at(i, r), ref(i, r), 1e-12);
    const Eigen::VectorXd row = to_eigen(gather_rows(f, {i})).transpose();
    EXPECT_LT((row - bb * (bb.transpose() * row)).norm(), 1e-10);
  }
  EXPECT_THROW(reconstruct(b, Tensor::zeros({1, 4})), ShapeError);
}

TEST(Reconstruct, ProjectionIsIdempotentOnSimplex) {
  Rng rng(6);
  InvariantBasis b = InvariantBasis::random(12, 5, rng);
  Tensor w_hat = softmax(rng.normal_tensor({8, 5}));
  Tensor again = project(b, reconstruct(b, w_hat));
  for (std::size_t i = 0; i < w_hat.size(); ++i) EXPECT_NEAR(again[i], w_hat[i], 1e-10);
}

TEST(Reorthonormalize, IdempotentAndRestoresScale) {
  Rng rng(7);
  InvariantBasis b = InvariantBasis::random(9, 4, rng);
  const auto original = b.B.values();
  reorthonormalize(b);
  for (std::size_t i = 0; i < original.size(); ++i) EXPECT_NEAR(b.B[i], original[i], 1e-12);

  for (double& v : b.B.mutable_data()) v *= 2.0;
  reorthonormalize(b);
  for (std::size_t i = 0; i < original.size(); ++i) EXPECT_NEAR(b.B[i], original[i], 1e-12);
}

TEST(Reorthonormalize, NoisyBasisStaysCloseInSubspace) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    InvariantBasis b = InvariantBasis::random(16, 4, rng);
    const Eigen::MatrixXd before = to_eigen(b.B);
    for (double& v : b.B.mutable_data()) v += 0.01 * rng.normal();
    const Eigen::MatrixXd noisy = to_eigen(b.B);
    const double e = Eigen::JacobiSVD<Eigen::MatrixXd>(noisy - before).singularValues()(0);
    reorthonormalize(b);
    const Eigen::MatrixXd after = to_eigen(b.B);
    EXPECT_LT(orthonormality_defect(b), 1e-10);
    // Span of the noisy input is preserved exactly; distance to the clean span is small.
    const Eigen::MatrixXd noisy_q = Eigen::HouseholderQR<Eigen::MatrixXd>(noisy)
                                        .householderQ() *
                                    Eigen::MatrixXd::Identity(16, 4);
    EXPECT_LT((after * after.transpose() - noisy_q * noisy_q.transpose()).norm(), 1e-8);
    // sin of the largest angle is at most |E|_2 / sigma_min(B + E) <= |E|_2 / (1 - |E|_2).
    EXPECT_LE(std::sin(max_principal_angle(before, after)), e / (1.0 - e) + 1e-12);
    EXPECT_LT(e, 0.1);
  }
}

TEST(Reorthonormalize, RankDeficientNamesColumn) {
  Tensor b({4, 3}, {1, 0, 2, 0, 1, 0, 0, 0, 0, 0, 0, 0});
  InvariantBasis basis{b};
  try {
    reorthonormalize(basis);
    FAIL() << "expected DegenerateBasisError";
  } catch (const DegenerateBasisError& e) {
    EXPECT_EQ(e.column(), 2u);
  }
  Rng rng(9);
  reinitialize_column(basis, 2, rng);
  EXPECT_LT(orthonormality_defect(basis), 1e-12);
  EXPECT_EQ(basis.B[0], 1.0);  // untouched columns keep their values
  EXPECT_EQ(basis.B[4], 1.0);
}

TEST(Lcib, ChainPassesGradientCheck) {
  Rng rng(10);
  InvariantBasis b = InvariantBasis::random(6, 3, rng);
  Tensor f = rng.normal_tensor({4, 6}, 1.0, true);
  Tensor w = rng.normal_tensor({4, 6});
  const double err = gradient_check(
      [&](const std::vector<Tensor>& in) {
        return sum(mul(invariant_features(InvariantBasis{in[1]}, in[0]), w));
      },
      {f, b.B}, 1e-5);
  EXPECT_LT(err, 1e-4);
}

TEST(AdversarialLoss, HalfEverywhereIsLn2) {
  Rng rng(11);
  Discriminator d = Discriminator::init(5, 4, rng);
  for (auto& p : d.params())
    for (double& v : p.value.mutable_data()) v = 0.0;
  Tensor l = adversarial_loss(d, rng.normal_tensor({3, 5}), rng.normal_tensor({3, 5}));
  EXPECT_NEAR(l.item(), std::log(2.0), 1e-15);
}

TEST(AdversarialLoss, PerfectSeparationApproachesZero) {
  double prev = INFINITY;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    std::vector<double> p{1.0 - eps, 1.0 - eps, eps, eps};
    const double l = binary_cross_entropy(Tensor::vector(p), {1, 1, 0, 0}).item();
    EXPECT_LT(l, prev);
    EXPECT_NEAR(l, -std::log1p(-eps), 1e-9);
    prev = l;
  }
  // Exact 0/1 outputs are clamped, so the loss stays finite.
  EXPECT_TRUE(std::isfinite(binary_cross_entropy(Tensor::vector({0.0, 1.0}), {1, 0}).item()));
}

TEST(AdversarialLoss, MatchesPerSampleHandSum) {
  Rng rng(12);
  Discriminator d = Discriminator::init(4, 6, rng);
  for (double& b : d.out.bias.mutable_data()) b = 0.3;
  Tensor f = rng.normal_tensor({4, 4}), fh = rng.normal_tensor({4, 4});
  Tensor pf = discriminate(d, f), ph = discriminate(d, fh);
  double ref = 0.0;
  for (std::size_t i = 0; i < 4; ++i) ref += -std::log(pf[i]) - std::log(1.0 - ph[i]);
  ref /= 8.0;
  EXPECT_NEAR(adversarial_loss(d, f, fh).item(), ref, 1e-12);
  EXPECT_THROW(adversarial_loss(d, f, Tensor::zeros({3, 4})), ShapeError);
  EXPECT_THROW(adversarial_loss(d, Tensor::zeros({0, 4}), Tensor::zeros({0, 4})), ContractError);
}

TEST(AdversarialLoss, ReversalSignsOnTwoSampleBatch) {
  // Discriminator parameters see +dL; everything upstream of the reversal
  // sees -lambda * dL.
  Rng rng(13);
  Discriminator d = Discriminator::init(3, 4, rng);
  InvariantBasis b = InvariantBasis::random(3, 2, rng);
  Tensor f = rng.normal_tensor({2, 3}, 1.0, true);
  const double lambda = 0.5;

  auto grads = [&](std::optional<double> strength) {
    for (auto& p : d.params()) p.value.clear_grad();
    b.B.clear_grad();
    f.clear_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(adversarial_loss(d, f, invariant_features(b, f), strength));
    std::vector<std::vector<double>> out;
    for (auto& p : d.params()) out.emplace_back(p.value.grad().begin(), p.value.grad().end());
    out.emplace_back(b.B.grad().begin(), b.B.grad().end());
    out.emplace_back(f.grad().begin(), f.grad().end());
    return out;
  };
  const auto plain = grads(std::nullopt);
  const auto reversed = grads(lambda);
  const std::size_t n_disc = d.params().size();
  for (std::size_t k = 0; k < plain.size(); ++k) {
    const double scale = k < n_disc ? 1.0 : -lambda;
    for (std::size_t i = 0; i < plain[k].size(); ++i)
      EXPECT_NEAR(reversed[k][i], scale * plain[k][i], 1e-14);
  }
  double basis_norm = 0.0;
  for (double g : plain[n_disc]) basis_norm += std::abs(g);
  EXPECT_GT(basis_norm, 0.0);
}

TEST(Oracle, ExtractionAtThreeSizes) {
  for (auto [d, m] : {std::pair<std::size_t, std::size_t>{16, 4}, {32, 8}, {128, 24}}) {
    const auto r = oracle_subspace_extraction(d, m, 100, 1);
    EXPECT_LT(r.max_coordinate_error, 1e-10) << d << "x" << m;
    EXPECT_LT(r.max_reconstruction_error, 1e-10) << d << "x" << m;
  }
}

TEST(Oracle, DegenerateComponents) {
  const auto no_specific = oracle_subspace_extraction(16, 4, 20, 2, true, false);
  EXPECT_LT(no_specific.max_coordinate_error, 1e-12);
  EXPECT_LT(no_specific.max_reconstruction_error, 1e-12);
  const auto no_invariant = oracle_subspace_extraction(16, 15, 20, 3, false, true);
  EXPECT_LT(no_invariant.max_coordinate_error, 1e-12);
  EXPECT_THROW(oracle_subspace_extraction(8, 8, 1, 1), ContractError);
}

TEST(Oracle, NoSpecificComponentMeansReconstructionEqualsFeature) {
  Rng rng(14);
  const Eigen::MatrixXd q = random_orthogonal(10, rng);
  InvariantBasis b{from_eigen(q.leftCols(4))};
  Eigen::VectorXd w(4);
  for (auto& x : w) x = rng.normal();
  const Eigen::VectorXd f = q.leftCols(4) * w;
  Tensor fh = reconstruct(b, project(b, from_eigen(f.transpose())));
  for (std::size_t r = 0; r < 10; ++r) EXPECT_NEAR(fh[r], f(r), 1e-12);
}
