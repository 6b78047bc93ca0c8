#pragma once

// Learnable common invariant basis: projection of features onto an
// orthonormal m-dimensional subspace, softmax regularization of the
// coordinates, reconstruction, and the adversarial information-preservation
// loss that pits reconstructions against the original features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "darsd/networks.hpp"
#include "darsd/ops.hpp"
#include "darsd/rng.hpp"
#include "darsd/tensor.hpp"

namespace darsd {

class DegenerateBasisError : public std::domain_error {
 public:
  DegenerateBasisError(const std::string& what, std::size_t column)
      : std::domain_error(what), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

namespace detail {

// Gram-Schmidt run twice over the columns of a row-major d x m matrix.
// Column signs are kept, so a positively scaled orthonormal input maps back to
// itself. A column whose residual falls below rank_tol of its original norm is
// reported as rank deficient.
inline void orthonormalize_columns(std::span<double> a, std::size_t d, std::size_t m,
                                   double rank_tol = 1e-10) {
  for (std::size_t j = 0; j < m; ++j) {
    double original = 0.0;
    for (std::size_t r = 0; r < d; ++r) original += a[r * m + j] * a[r * m + j];
    original = std::sqrt(original);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t r = 0; r < d; ++r) dot += a[r * m + k] * a[r * m + j];
        for (std::size_t r = 0; r < d; ++r) a[r * m + j] -= dot * a[r * m + k];
      }
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += a[r * m + j] * a[r * m + j];
    norm = std::sqrt(norm);
    if (!std::isfinite(norm) || !(original > 0.0) || norm <= rank_tol * original) {
      throw DegenerateBasisError(
          "basis column " + std::to_string(j) + " is linearly dependent", j);
    }
    for (std::size_t r = 0; r < d; ++r) a[r * m + j] /= norm;
  }
}

}  // namespace detail

// B_obs (d x m) with orthonormal columns, m < d.
struct InvariantBasis {
  Tensor B;

  std::size_t d() const { return B.dim(0); }
  std::size_t m() const { return B.dim(1); }

  // Orthonormalized Gaussian matrix: a uniformly random m-dim subspace.
  static InvariantBasis random(std::size_t d, std::size_t m, Rng& rng) {
    if (m == 0 || m >= d) {
      throw ContractError("invariant basis needs 0 < m < d, got d=" +
                          std::to_string(d) + " m=" + std::to_string(m));
    }
    for (;;) {
      Tensor b = rng.normal_tensor({d, m}, 1.0, true);
      try {
        detail::orthonormalize_columns(b.mutable_data(), d, m);
        return {b};
      } catch (const DegenerateBasisError&) {
      }
    }
  }

  ParamList params() const { return {{"lcib.B", B}}; }
};

// ||B^T B - I||_F
inline double orthonormality_defect(const InvariantBasis& basis) {
  const std::size_t d = basis.d(), m = basis.m();
  auto b = basis.B.data();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += b[r * m + i] * b[r * m + j];
      const double e = dot - (i == j ? 1.0 : 0.0);
      s += e * e;
    }
  return std::sqrt(s);
}

// Restores orthonormal columns in place, preserving the spanned subspace.
// Throws DegenerateBasisError if B has lost column rank.
inline void reorthonormalize(InvariantBasis& basis) {
  std::vector<double> work(basis.B.data().begin(), basis.B.data().end());
  detail::orthonormalize_columns(work, basis.d(), basis.m());
  std::copy(work.begin(), work.end(), basis.B.mutable_data().begin());
}

// Replaces column `col` with a random direction orthogonal to the others.
inline void reinitialize_column(InvariantBasis& basis, std::size_t col, Rng& rng) {
  const std::size_t d = basis.d(), m = basis.m();
  auto b = basis.B.mutable_data();
  for (;;) {
    std::vector<double> work(b.begin(), b.end());
    for (std::size_t r = 0; r < d; ++r) work[r * m + col] = rng.normal();
    // Move the fresh column last so every other column is kept intact.
    std::vector<double> perm(work.size());
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < m; ++j)
      if (j != col) order.push_back(j);
    order.push_back(col);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t j = 0; j < m; ++j) perm[r * m + j] = work[r * m + order[j]];
    try {
      detail::orthonormalize_columns(perm, d, m);
    } catch (const DegenerateBasisError&) {
      continue;
    }
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t j = 0; j < m; ++j) b[r * m + order[j]] = perm[r * m + j];
    return;
  }
}

// Coordinates w = B^T f, row-wise: f[batch x d] -> [batch x m].
inline Tensor project(const InvariantBasis& basis, const Tensor& f) {
  if (f.rank() != 2 || f.dim(1) != basis.d()) {
    throw ShapeError("project: features " + shape_str(f.shape()) +
                     " incompatible with basis " + shape_str(basis.B.shape()));
  }
  return matmul(f, basis.B);
}

// Softmax over the m coordinates of each row.
inline Tensor regularize_coords(const Tensor& w) { return softmax(w); }

// f_hat = B w_hat, row-wise: [batch x m] -> [batch x d].
inline Tensor reconstruct(const InvariantBasis& basis, const Tensor& w_hat) {
  if (w_hat.rank() != 2 || w_hat.dim(1) != basis.m()) {
    throw ShapeError("reconstruct: coordinates " + shape_str(w_hat.shape()) +
                     " incompatible with basis " + shape_str(basis.B.shape()));
  }
  return matmul(w_hat, basis.B, Transpose::yes);
}

// project -> softmax -> reconstruct.
inline Tensor invariant_features(const InvariantBasis& basis, const Tensor& f) {
  return reconstruct(basis, regularize_coords(project(basis, f)));
}

// Clamped binary cross-entropy: -mean(z log p + (1 - z) log(1 - p)).
inline constexpr double kProbabilityFloor = 1e-7;

inline Tensor binary_cross_entropy(const Tensor& p, const std::vector<int>& z) {
  if (p.rank() != 1 || p.dim(0) != z.size()) {
    throw ShapeError("binary_cross_entropy: probabilities " + shape_str(p.shape()) +
                     " vs " + std::to_string(z.size()) + " labels");
  }
  if (z.empty()) throw ContractError("binary_cross_entropy: empty batch");
  std::vector<double> zpos(z.size()), zneg(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    zpos[i] = z[i] ? 1.0 : 0.0;
    zneg[i] = 1.0 - zpos[i];
  }
  Tensor log_p = log(p, kProbabilityFloor);
  Tensor log_q = log(add(mul(p, -1.0), 1.0), kProbabilityFloor);
  Tensor ll = add(mul(log_p, Tensor::vector(zpos)), mul(log_q, Tensor::vector(zneg)));
  return mul(mean(ll), -1.0);
}

// BCE of the discriminator over the pooled batch {F (z = 1), F_hat (z = 0)}.
// Minimizing it is the discriminator's side of the min-max game. When
// reversal_strength is set, gradients reaching F and F_hat are multiplied by
// -reversal_strength, which makes the upstream encoder and basis play the
// opposing side in a single backward pass.
inline Tensor adversarial_loss(const Discriminator& disc, const Tensor& original,
                               const Tensor& reconstructed,
                               std::optional<double> reversal_strength = std::nullopt) {
  if (original.rank() != 2 || original.shape() != reconstructed.shape()) {
    throw ShapeError("adversarial_loss: original " + shape_str(original.shape()) +
                     " vs reconstructed " + shape_str(reconstructed.shape()));
  }
  const std::size_t n = original.dim(0);
  if (n == 0) throw ContractError("adversarial_loss: empty batch");
  Tensor pooled = concat({original, reconstructed}, 0);
  if (reversal_strength) pooled = grad_reverse(pooled, *reversal_strength);
  // Column 1 of discriminate_both is D(f), column 0 is 1 - D(f); picking the
  // column matching z gives the clamped likelihood directly.
  Tensor both = discriminate_both(disc, pooled);
  std::vector<std::size_t> cols(2 * n, 0);
  std::fill(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(n), 1);
  return mul(mean(log(pick(both, cols), kProbabilityFloor)), -1.0);
}

struct ExtractionReport {
  double max_coordinate_error = 0.0;      // |B_inv^T f - w_inv|
  double max_reconstruction_error = 0.0;  // |B_inv w_inv - f_inv|
};

// Executable form of the extraction theorem: with orthonormal B_inv (d x m)
// and an orthonormal complement B_spe, any f = B_inv w_inv + B_spe w_spe
// satisfies B_inv^T f = w_inv exactly, and B_inv w_inv recovers f_inv.
inline ExtractionReport oracle_subspace_extraction(std::size_t d, std::size_t m,
                                                   std::size_t trials,
                                                   std::uint64_t seed,
                                                   bool zero_specific = false,
                                                   bool zero_invariant = false) {
  if (m == 0 || m >= d) throw ContractError("oracle_subspace_extraction: need 0 < m < d");
  Rng rng(seed);
  ExtractionReport report;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<double> q;
    for (;;) {
      Tensor g = rng.normal_tensor({d, d});
      q.assign(g.data().begin(), g.data().end());
      try {
        detail::orthonormalize_columns(q, d, d);
        break;
      } catch (const DegenerateBasisError&) {
      }
    }
    std::vector<double> b_inv(d * m), b_spe(d * (d - m));
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t j = 0; j < m; ++j) b_inv[r * m + j] = q[r * d + j];
      for (std::size_t j = m; j < d; ++j) b_spe[r * (d - m) + (j - m)] = q[r * d + j];
    }
    std::vector<double> w_inv(m), w_spe(d - m);
    for (double& w : w_inv) w = zero_invariant ? 0.0 : rng.normal();
    for (double& w : w_spe) w = zero_specific ? 0.0 : rng.normal();

    Tensor basis_inv({d, m}, b_inv);
    Tensor f_inv = matmul(Tensor({1, m}, w_inv), basis_inv, Transpose::yes);
    Tensor f_spe = matmul(Tensor({1, d - m}, w_spe), Tensor({d, d - m}, b_spe),
                          Transpose::yes);
    Tensor f = add(f_inv, f_spe);

    InvariantBasis observed{basis_inv};
    Tensor recovered = project(observed, f);
    for (std::size_t j = 0; j < m; ++j) {
      report.max_coordinate_error =
          std::max(report.max_coordinate_error, std::abs(recovered[j] - w_inv[j]));
    }
    Tensor rebuilt = reconstruct(observed, recovered);
    for (std::size_t r = 0; r < d; ++r) {
      report.max_reconstruction_error =
          std::max(report.max_reconstruction_error, std::abs(rebuilt[r] - f_inv[r]));
    }
  }
  return report;
}

}  // namespace darsd
