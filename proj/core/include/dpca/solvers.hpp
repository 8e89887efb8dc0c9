#pragma once

// Dissociative PCA solvers.
//
// The model keeps the truncated SVD bases fixed and learns two K×K
// dissociation matrices: modified PCs U = U_q·Ψ and modified loading vectors
// Z = Φ·Z_q, the latter sparsified by adaptive soft thresholding (and, for
// the 1b/2 variants, a second firm-thresholding pass that lets Z leave the
// row space of Z_q). Reconstruction is X ≈ U·Z; V = Ψ·Φ is kept for
// diagnostics only.
//
// Three solvers share that model:
//   dpca1a  φ rows once per outer pass from uₖᵀX, then ψ columns by block
//           coordinate descent on the profiles A = ZZᵀ, B = XZᵀ.
//   dpca1b  φ rows by descent on A = UᵀU, B = UᵀX until stationary, firm
//           thresholding, then the same ψ descent as dpca1a.
//   dpca2   coordinate descent over (ψₖ, φᵏ) pairs against the residual
//           Eₖ = X − Σ_{i≠k} uᵢzⁱ.
// plus the plain-PCA baseline in the same output shape.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpca/linalg.hpp"
#include "dpca/matrix.hpp"
#include "dpca/thresholding.hpp"

namespace dpca {

enum class Solver { pca, dpca1a, dpca1b, dpca2 };

std::string_view to_string(Solver s) noexcept;
/// Accepts "pca", "dpca1a", "dpca1b", "dpca2"; throws std::invalid_argument otherwise.
Solver parse_solver(std::string_view name);

struct DpcaConfig {
  std::size_t K = 8;
  double lambda = 0.0;
  /// When set, the penalty applied is lambda·√(n·p).
  bool scale_lambda = false;
  /// Second-level thresholds; required by dpca1b and dpca2, ignored by dpca1a.
  std::optional<FirmThresholds> firm;
  double outer_tol = 0.01;  ///< relative ‖U − U_prev‖_F / ‖U_prev‖_F
  double inner_tol = 1e-5;  ///< absolute Frobenius change of the inner loops
  std::size_t max_outer = 30;
  std::size_t max_inner = 100;

  void validate() const;
  double effective_lambda(std::size_t n, std::size_t p) const;
};

struct DissociationState {
  Matrix psi;  ///< K×K, columns ψₖ
  Matrix phi;  ///< K×K, rows φᵏ
};

struct DpcaFactorization {
  Solver solver = Solver::pca;
  Matrix U;  ///< n×K modified PCs
  Matrix Z;  ///< K×p modified loading vectors
  DissociationState state;
  Matrix V;  ///< Ψ·Φ
  std::size_t iterations_run = 0;
  bool converged = false;
  std::vector<double> rel_change_trace;
  /// Number of times a component was found dead and reinitialized.
  std::size_t dead_events = 0;
  /// Penalty actually applied (after optional √(n·p) scaling).
  double lambda_used = 0.0;

  std::size_t K() const noexcept { return U.cols(); }
  Matrix reconstruct() const { return matmul(U, Z); }
};

/// Profile matrices and residual of the descent updates.
struct Workspace {
  Matrix A;
  Matrix B;
  Matrix E;
};

/// Fixed SVD bases of a run together with the two small factorizations every
/// update needs: pinv(U_qᵀU_q) and a Cholesky factor of Z_qZ_qᵀ.
class SeedBasis {
public:
  /// Throws std::invalid_argument if the shapes disagree or if Z_qZ_qᵀ deviates
  /// from the identity by more than 1e-6 in Frobenius norm.
  SeedBasis(Matrix uq, Matrix zq);
  explicit SeedBasis(const SvdFactors& svd) : SeedBasis(svd.U, svd.Z) {}

  std::size_t K() const noexcept { return uq_.cols(); }
  const Matrix& Uq() const noexcept { return uq_; }
  const Matrix& Zq() const noexcept { return zq_; }

  /// s·Z_qᵀ·(Z_qZ_qᵀ)⁻¹
  std::vector<double> phi_from_row(std::span<const double> s) const;
  /// φ·Z_q
  std::vector<double> z_from_phi(std::span<const double> phi) const;
  /// pinv(U_qᵀU_q)·U_qᵀ·t
  std::vector<double> psi_from_target(std::span<const double> t) const;
  /// U_q·ψ
  std::vector<double> u_from_psi(std::span<const double> psi) const;

private:
  Matrix uq_;
  Matrix zq_;
  Matrix uq_gram_pinv_;
  Cholesky zq_gram_;
};

struct PhiRowUpdate {
  std::vector<double> phi;
  std::vector<double> z;
  bool dead = false;
};

struct PsiColUpdate {
  std::vector<double> psi;
  std::vector<double> u;
  bool dead = false;
};

/// φᵏ = T_λ(uₖᵀX)·Z_qᵀ(Z_qZ_qᵀ)⁻¹ and zᵏ = φᵏZ_q. A zero uₖ yields zero rows
/// flagged dead.
PhiRowUpdate update_phi_row_plain(std::span<const double> u_k, const Matrix& x,
                                  const SeedBasis& seed, double lambda);

/// Descent step for row k with A = UᵀU, B = UᵀX:
/// y = (bᵏ − aᵏZ)/aₖₖ + zᵏ, then the same threshold-and-project as above.
/// aₖₖ ≤ 1e-12 yields zero rows flagged dead.
PhiRowUpdate update_phi_row_descent(std::size_t k, const Workspace& ws, const Matrix& z,
                                    const SeedBasis& seed, double lambda);

/// Block coordinate step for column k with A = ZZᵀ, B = XZᵀ:
/// ψₖ = pinv(U_qᵀU_q)U_qᵀ((bₖ − U aₖ)/aₖₖ + uₖ), ψₖ /= max(‖U_qψₖ‖, 1).
/// aₖₖ ≤ 1e-12 resets ψₖ to eₖ and flags the component dead.
PsiColUpdate update_psi_col(std::size_t k, const Workspace& ws, const Matrix& u,
                            const SeedBasis& seed);

/// ψₖ = pinv(U_qᵀU_q)U_qᵀEₖzᵏᵀ normalized so ‖U_qψₖ‖ = 1. A zero z row, or a
/// residual with no component in span(U_q), resets ψₖ to eₖ (dead).
PsiColUpdate update_psi_col_resid(std::size_t k, const Matrix& e_k, const SeedBasis& seed,
                                  std::span<const double> z_row);

/// Repeats update_phi_row_descent over all rows (A, B frozen) until
/// ‖Z − Z_prev‖_F ≤ tol or max_passes. Returns the number of passes.
std::size_t run_phi_descent(const Workspace& ws, Matrix& z, Matrix& phi, const SeedBasis& seed,
                            double lambda, double tol, std::size_t max_passes,
                            std::size_t* dead_events = nullptr);

/// Repeats update_psi_col over all columns until ‖U − U_prev‖_F ≤ tol or
/// max_passes. Returns the number of passes.
std::size_t run_psi_descent(const Workspace& ws, Matrix& u, Matrix& psi, const SeedBasis& seed,
                            double tol, std::size_t max_passes,
                            std::size_t* dead_events = nullptr);

DpcaFactorization fit_pca_baseline(const Matrix& x, std::size_t k);
DpcaFactorization fit_pca_baseline(const SvdFactors& svd);

DpcaFactorization fit_dpca1a(const Matrix& x, const Matrix& uq, const Matrix& zq,
                             const DpcaConfig& cfg);
DpcaFactorization fit_dpca1b(const Matrix& x, const Matrix& uq, const Matrix& zq,
                             const DpcaConfig& cfg);
DpcaFactorization fit_dpca2(const Matrix& x, const Matrix& uq, const Matrix& zq,
                            const DpcaConfig& cfg);

/// Dispatches on `solver` with a precomputed SVD seed.
DpcaFactorization fit(Solver solver, const Matrix& x, const SvdFactors& svd, const DpcaConfig& cfg);
/// Computes truncated_svd(x, cfg.K) first. Throws if X has rank zero.
DpcaFactorization fit(Solver solver, const Matrix& x, const DpcaConfig& cfg);

/// 100·[1 − ‖X − X·pinv(Z)·Z‖²_F / ‖X‖²_F]. Throws std::invalid_argument for X = 0.
double explained_variance(const Matrix& x, const Matrix& z);

/// Tr((ΨΦ)ᵀ(ΨΦ)), the energy carried by the dissociated middle matrix.
double dissociated_energy(const DpcaFactorization& f);

}  // namespace dpca
