#pragma once

// Decompositions: symmetric eigen (cyclic Jacobi), truncated SVD through the
// Gram matrix, a one-sided Jacobi SVD backing the pseudoinverse, and Cholesky.

#include <cstddef>
#include <span>
#include <vector>

#include "dpca/matrix.hpp"

namespace dpca {

struct SymmetricEigen {
  std::vector<double> values;  ///< descending
  Matrix vectors;              ///< column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Only the upper
/// triangle is trusted; the input is symmetrized first.
SymmetricEigen symmetric_eigen(const Matrix& a);

/// Truncated SVD triple X ≈ U_q · diag(D_q) · Z_q with Z_q = W_qᵀ.
///
/// `rank()` may be smaller than `requested` when X is numerically rank
/// deficient; the factors are never padded.
struct SvdFactors {
  Matrix U;               ///< n×K, orthonormal columns
  std::vector<double> D;  ///< K singular values, descending, > 0
  Matrix Z;               ///< K×p, orthonormal rows
  std::size_t requested = 0;

  std::size_t rank() const noexcept { return D.size(); }
  bool rank_deficient() const noexcept { return rank() < requested; }
  /// U · diag(D) · Z
  Matrix reconstruct() const;
};

/// Singular values below this fraction of d₁ are treated as zero.
inline constexpr double kRankTolerance = 1e-12;

/// Thin truncated SVD of an n×p matrix. Diagonalizes the smaller Gram matrix
/// (XᵀX when n ≥ p, XXᵀ otherwise) and recovers the other side by projection.
/// Sign convention: the largest-magnitude entry of every left singular vector
/// is positive, ties going to the lowest index.
///
/// Throws std::invalid_argument for K outside [1, min(n, p)] or non-finite X.
SvdFactors truncated_svd(const Matrix& x, std::size_t k);

/// Full thin SVD by one-sided Jacobi rotations: m = U · diag(S) · Vᵀ with
/// min(rows, cols) singular triplets, descending.
struct ThinSvd {
  Matrix U;
  std::vector<double> S;
  Matrix V;
};
ThinSvd jacobi_svd(const Matrix& m);

/// Moore–Penrose pseudoinverse. Singular values at or below
/// max(rows, cols) · ε · s_max are dropped.
Matrix pinv(const Matrix& m);

/// Cholesky factorization of a symmetric positive definite matrix.
class Cholesky {
public:
  /// Throws std::domain_error when `spd` is not positive definite.
  explicit Cholesky(const Matrix& spd);

  std::size_t size() const noexcept { return lower_.rows(); }
  /// Solves A x = b.
  std::vector<double> solve(std::span<const double> b) const;

private:
  Matrix lower_;
};

/// Modified Gram–Schmidt on the rows of `m`, applied twice. Rows that
/// collapse to zero are left as zero.
void orthonormalize_rows(Matrix& m);

}  // namespace dpca
