#include "dpca/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dpca {

namespace {

constexpr double kDeadEnergy = 1e-12;
constexpr double kGramDeviation = 1e-6;

void count_dead(std::size_t* counter, bool dead) {
  if (dead && counter) ++*counter;
}

std::vector<double> unit(std::size_t k, std::size_t n) {
  std::vector<double> e(n, 0.0);
  e[k] = 1.0;
  return e;
}

PhiRowUpdate threshold_and_project(std::vector<double> y, const SeedBasis& seed, double lambda) {
  soft_adaptive_inplace(y, lambda);
  PhiRowUpdate out;
  out.phi = seed.phi_from_row(y);
  out.z = seed.z_from_phi(out.phi);
  return out;
}

PsiColUpdate reset_column(std::size_t k, const SeedBasis& seed) {
  PsiColUpdate out;
  out.psi = unit(k, seed.K());
  out.u = seed.u_from_psi(out.psi);
  out.dead = true;
  return out;
}

struct RunState {
  Matrix u;
  Matrix z;
  Matrix psi;
  Matrix phi;
};

RunState initial_state(const SeedBasis& seed, std::size_t p) {
  const std::size_t k = seed.K();
  return {seed.Uq(), Matrix(k, p), Matrix::identity(k), Matrix(k, k)};
}

DpcaFactorization finish(Solver solver, RunState s, double lambda) {
  DpcaFactorization f;
  f.solver = solver;
  f.V = matmul(s.psi, s.phi);
  f.U = std::move(s.u);
  f.Z = std::move(s.z);
  f.state = {std::move(s.psi), std::move(s.phi)};
  f.lambda_used = lambda;
  return f;
}

void check_inputs(const Matrix& x, const Matrix& uq, const Matrix& zq, const DpcaConfig& cfg) {
  cfg.validate();
  require_finite(x, "DPCA input");
  if (uq.rows() != x.rows() || zq.cols() != x.cols() || uq.cols() != zq.rows() || uq.cols() == 0) {
    throw std::invalid_argument("DPCA: seed factors do not match the data matrix");
  }
}

const FirmThresholds& require_firm(const DpcaConfig& cfg, const char* who) {
  if (!cfg.firm) throw std::invalid_argument(std::string(who) + " requires rho1/rho2 firm thresholds");
  return *cfg.firm;
}

// ‖U − U_l‖_F / ‖U_l‖_F, appended to the trace; true once below tolerance.
bool record_outer(DpcaFactorization& f, const Matrix& u, const Matrix& u_prev, double tol) {
  const double base = frobenius_norm(u_prev);
  const double rel = base > 0.0 ? frobenius_distance(u, u_prev) / base : 0.0;
  f.rel_change_trace.push_back(rel);
  ++f.iterations_run;
  return rel <= tol;
}

}  // namespace

std::string_view to_string(Solver s) noexcept {
  switch (s) {
    case Solver::pca: return "pca";
    case Solver::dpca1a: return "dpca1a";
    case Solver::dpca1b: return "dpca1b";
    case Solver::dpca2: return "dpca2";
  }
  return "unknown";
}

Solver parse_solver(std::string_view name) {
  if (name == "pca") return Solver::pca;
  if (name == "dpca1a") return Solver::dpca1a;
  if (name == "dpca1b") return Solver::dpca1b;
  if (name == "dpca2") return Solver::dpca2;
  throw std::invalid_argument("unknown solver '" + std::string(name) +
                              "' (expected pca, dpca1a, dpca1b or dpca2)");
}

void DpcaConfig::validate() const {
  if (K < 1) throw std::invalid_argument("DpcaConfig: K must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("DpcaConfig: lambda must be finite and >= 0");
  if (!(outer_tol > 0.0)) throw std::invalid_argument("DpcaConfig: outer_tol must be > 0");
  if (!(inner_tol > 0.0)) throw std::invalid_argument("DpcaConfig: inner_tol must be > 0");
  if (max_outer < 1) throw std::invalid_argument("DpcaConfig: max_outer must be >= 1");
  if (max_inner < 1) throw std::invalid_argument("DpcaConfig: max_inner must be >= 1");
}

double DpcaConfig::effective_lambda(std::size_t n, std::size_t p) const {
  return scale_lambda ? lambda * std::sqrt(static_cast<double>(n) * static_cast<double>(p)) : lambda;
}

SeedBasis::SeedBasis(Matrix uq, Matrix zq)
    : uq_(std::move(uq)),
      zq_(std::move(zq)),
      uq_gram_pinv_(pinv(matmul_tn(uq_, uq_))),
      zq_gram_(matmul_nt(zq_, zq_)) {
  if (uq_.cols() != zq_.rows()) throw std::invalid_argument("SeedBasis: U_q and Z_q disagree on K");
  const Matrix g = matmul_nt(zq_, zq_);
  const double dev = frobenius_distance(g, Matrix::identity(g.rows()));
  if (dev > kGramDeviation) {
    throw std::invalid_argument("SeedBasis: Z_q rows are not orthonormal (deviation " +
                                std::to_string(dev) + ")");
  }
}

std::vector<double> SeedBasis::phi_from_row(std::span<const double> s) const {
  return zq_gram_.solve(matvec(zq_, s));
}

std::vector<double> SeedBasis::z_from_phi(std::span<const double> phi) const {
  return matvec_t(zq_, phi);
}

std::vector<double> SeedBasis::psi_from_target(std::span<const double> t) const {
  return matvec(uq_gram_pinv_, matvec_t(uq_, t));
}

std::vector<double> SeedBasis::u_from_psi(std::span<const double> psi) const {
  return matvec(uq_, psi);
}

PhiRowUpdate update_phi_row_plain(std::span<const double> u_k, const Matrix& x,
                                  const SeedBasis& seed, double lambda) {
  if (norm2(u_k) == 0.0) {
    return {std::vector<double>(seed.K(), 0.0), std::vector<double>(x.cols(), 0.0), true};
  }
  return threshold_and_project(matvec_t(x, u_k), seed, lambda);
}

PhiRowUpdate update_phi_row_descent(std::size_t k, const Workspace& ws, const Matrix& z,
                                    const SeedBasis& seed, double lambda) {
  const double akk = ws.A(k, k);
  if (!(akk > kDeadEnergy)) {
    return {std::vector<double>(seed.K(), 0.0), std::vector<double>(z.cols(), 0.0), true};
  }
  // y = (bᵏ − aᵏZ)/aₖₖ + zᵏ
  std::vector<double> y = matvec_t(z, ws.A.row(k));
  auto bk = ws.B.row(k);
  auto zk = z.row(k);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = (bk[j] - y[j]) / akk + zk[j];
  return threshold_and_project(std::move(y), seed, lambda);
}

PsiColUpdate update_psi_col(std::size_t k, const Workspace& ws, const Matrix& u,
                            const SeedBasis& seed) {
  const double akk = ws.A(k, k);
  if (!(akk > kDeadEnergy)) return reset_column(k, seed);
  // t = (bₖ − U aₖ)/aₖₖ + uₖ
  const std::vector<double> ua = matvec(u, ws.A.col(k));
  std::vector<double> t(u.rows());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (ws.B(i, k) - ua[i]) / akk + u(i, k);

  PsiColUpdate out;
  out.psi = seed.psi_from_target(t);
  out.u = seed.u_from_psi(out.psi);
  const double scale = std::max(norm2(out.u), 1.0);
  for (double& v : out.psi) v /= scale;
  for (double& v : out.u) v /= scale;
  return out;
}

PsiColUpdate update_psi_col_resid(std::size_t k, const Matrix& e_k, const SeedBasis& seed,
                                  std::span<const double> z_row) {
  if (norm2(z_row) == 0.0) return reset_column(k, seed);
  PsiColUpdate out;
  const std::vector<double> target = matvec(e_k, z_row);
  out.psi = seed.psi_from_target(target);
  out.u = seed.u_from_psi(out.psi);
  const double nrm = norm2(out.u);
  if (!(nrm > 1e-10 * norm2(target)) || !std::isfinite(nrm)) return reset_column(k, seed);
  for (double& v : out.psi) v /= nrm;
  for (double& v : out.u) v /= nrm;
  return out;
}

std::size_t run_phi_descent(const Workspace& ws, Matrix& z, Matrix& phi, const SeedBasis& seed,
                            double lambda, double tol, std::size_t max_passes,
                            std::size_t* dead_events) {
  std::size_t passes = 0;
  while (passes < max_passes) {
    const Matrix z_prev = z;
    for (std::size_t k = 0; k < z.rows(); ++k) {
      PhiRowUpdate upd = update_phi_row_descent(k, ws, z, seed, lambda);
      count_dead(dead_events, upd.dead);
      phi.set_row(k, upd.phi);
      z.set_row(k, upd.z);
    }
    ++passes;
    if (frobenius_distance(z, z_prev) <= tol) break;
  }
  return passes;
}

std::size_t run_psi_descent(const Workspace& ws, Matrix& u, Matrix& psi, const SeedBasis& seed,
                            double tol, std::size_t max_passes, std::size_t* dead_events) {
  std::size_t passes = 0;
  while (passes < max_passes) {
    const Matrix u_prev = u;
    for (std::size_t k = 0; k < u.cols(); ++k) {
      PsiColUpdate upd = update_psi_col(k, ws, u, seed);
      count_dead(dead_events, upd.dead);
      psi.set_col(k, upd.psi);
      u.set_col(k, upd.u);
    }
    ++passes;
    if (frobenius_distance(u, u_prev) <= tol) break;
  }
  return passes;
}

DpcaFactorization fit_pca_baseline(const SvdFactors& svd) {
  DpcaFactorization f;
  f.solver = Solver::pca;
  f.U = svd.U;
  f.Z = svd.Z;
  for (std::size_t k = 0; k < f.Z.rows(); ++k)
    for (double& v : f.Z.row(k)) v *= svd.D[k];
  f.state.psi = Matrix::identity(svd.rank());
  f.state.phi = Matrix::diagonal(svd.D);
  f.V = f.state.phi;
  f.converged = true;
  return f;
}

DpcaFactorization fit_pca_baseline(const Matrix& x, std::size_t k) {
  const SvdFactors svd = truncated_svd(x, k);
  if (svd.rank() == 0) throw std::invalid_argument("fit_pca_baseline: data matrix has rank zero");
  return fit_pca_baseline(svd);
}

DpcaFactorization fit_dpca1a(const Matrix& x, const Matrix& uq, const Matrix& zq,
                             const DpcaConfig& cfg) {
  check_inputs(x, uq, zq, cfg);
  const SeedBasis seed(uq, zq);
  const double lambda = cfg.effective_lambda(x.rows(), x.cols());
  RunState s = initial_state(seed, x.cols());
  DpcaFactorization f;
  Workspace ws;
  std::size_t dead = 0;

  for (std::size_t outer = 0; outer < cfg.max_outer; ++outer) {
    const Matrix u_prev = s.u;
    for (std::size_t k = 0; k < seed.K(); ++k) {
      PhiRowUpdate upd = update_phi_row_plain(s.u.col(k), x, seed, lambda);
      count_dead(&dead, upd.dead);
      s.phi.set_row(k, upd.phi);
      s.z.set_row(k, upd.z);
    }
    ws.A = matmul_nt(s.z, s.z);
    ws.B = matmul_nt(x, s.z);
    run_psi_descent(ws, s.u, s.psi, seed, cfg.inner_tol, cfg.max_inner, &dead);
    if (record_outer(f, s.u, u_prev, cfg.outer_tol)) {
      f.converged = true;
      break;
    }
  }

  DpcaFactorization out = finish(Solver::dpca1a, std::move(s), lambda);
  out.iterations_run = f.iterations_run;
  out.converged = f.converged;
  out.rel_change_trace = std::move(f.rel_change_trace);
  out.dead_events = dead;
  return out;
}

DpcaFactorization fit_dpca1b(const Matrix& x, const Matrix& uq, const Matrix& zq,
                             const DpcaConfig& cfg) {
  check_inputs(x, uq, zq, cfg);
  const FirmThresholds& firm_levels = require_firm(cfg, "dpca1b");
  const SeedBasis seed(uq, zq);
  const double lambda = cfg.effective_lambda(x.rows(), x.cols());
  RunState s = initial_state(seed, x.cols());
  DpcaFactorization f;
  Workspace ws;
  std::size_t dead = 0;

  for (std::size_t outer = 0; outer < cfg.max_outer; ++outer) {
    const Matrix u_prev = s.u;
    ws.A = matmul_tn(s.u, s.u);
    ws.B = matmul_tn(s.u, x);
    run_phi_descent(ws, s.z, s.phi, seed, lambda, cfg.inner_tol, cfg.max_inner, &dead);
    for (std::size_t k = 0; k < s.z.rows(); ++k) firm_inplace(s.z.row(k), firm_levels);

    ws.A = matmul_nt(s.z, s.z);
    ws.B = matmul_nt(x, s.z);
    run_psi_descent(ws, s.u, s.psi, seed, cfg.inner_tol, cfg.max_inner, &dead);
    if (record_outer(f, s.u, u_prev, cfg.outer_tol)) {
      f.converged = true;
      break;
    }
  }

  DpcaFactorization out = finish(Solver::dpca1b, std::move(s), lambda);
  out.iterations_run = f.iterations_run;
  out.converged = f.converged;
  out.rel_change_trace = std::move(f.rel_change_trace);
  out.dead_events = dead;
  return out;
}

DpcaFactorization fit_dpca2(const Matrix& x, const Matrix& uq, const Matrix& zq,
                            const DpcaConfig& cfg) {
  check_inputs(x, uq, zq, cfg);
  const FirmThresholds& firm_levels = require_firm(cfg, "dpca2");
  const SeedBasis seed(uq, zq);
  const double lambda = cfg.effective_lambda(x.rows(), x.cols());
  RunState s = initial_state(seed, x.cols());
  DpcaFactorization f;
  std::size_t dead = 0;
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();

  for (std::size_t outer = 0; outer < cfg.max_outer; ++outer) {
    const Matrix u_prev = s.u;
    // Residual of the full model, refreshed every pass to keep rounding from drifting.
    Matrix resid = x - matmul(s.u, s.z);
    for (std::size_t k = 0; k < seed.K(); ++k) {
      // Zeroing ψₖ, φᵏ, zᵏ drops term k from U·Z, so E_k = resid + uₖzᵏ.
      // uₖ keeps its previous value until it is rebuilt from the new ψₖ.
      const std::vector<double> uk = s.u.col(k);
      auto zk_old = s.z.row(k);
      for (std::size_t i = 0; i < n; ++i) {
        auto r = resid.row(i);
        const double ui = uk[i];
        for (std::size_t j = 0; j < p; ++j) r[j] += ui * zk_old[j];
      }
      const Matrix& e_k = resid;

      PhiRowUpdate phi_upd = threshold_and_project(matvec_t(e_k, uk), seed, lambda);
      firm_inplace(phi_upd.z, firm_levels);
      PsiColUpdate psi_upd = update_psi_col_resid(k, e_k, seed, phi_upd.z);
      if (psi_upd.dead) {
        ++dead;
        std::fill(phi_upd.phi.begin(), phi_upd.phi.end(), 0.0);
        std::fill(phi_upd.z.begin(), phi_upd.z.end(), 0.0);
      }
      s.phi.set_row(k, phi_upd.phi);
      s.z.set_row(k, phi_upd.z);
      s.psi.set_col(k, psi_upd.psi);
      s.u.set_col(k, psi_upd.u);

      auto zk_new = s.z.row(k);
      for (std::size_t i = 0; i < n; ++i) {
        auto r = resid.row(i);
        const double ui = psi_upd.u[i];
        for (std::size_t j = 0; j < p; ++j) r[j] -= ui * zk_new[j];
      }
    }
    if (record_outer(f, s.u, u_prev, cfg.outer_tol)) {
      f.converged = true;
      break;
    }
  }

  DpcaFactorization out = finish(Solver::dpca2, std::move(s), lambda);
  out.iterations_run = f.iterations_run;
  out.converged = f.converged;
  out.rel_change_trace = std::move(f.rel_change_trace);
  out.dead_events = dead;
  return out;
}

DpcaFactorization fit(Solver solver, const Matrix& x, const SvdFactors& svd, const DpcaConfig& cfg) {
  switch (solver) {
    case Solver::pca: return fit_pca_baseline(svd);
    case Solver::dpca1a: return fit_dpca1a(x, svd.U, svd.Z, cfg);
    case Solver::dpca1b: return fit_dpca1b(x, svd.U, svd.Z, cfg);
    case Solver::dpca2: return fit_dpca2(x, svd.U, svd.Z, cfg);
  }
  throw std::invalid_argument("fit: unknown solver");
}

DpcaFactorization fit(Solver solver, const Matrix& x, const DpcaConfig& cfg) {
  cfg.validate();
  const SvdFactors svd = truncated_svd(x, std::min({cfg.K, x.rows(), x.cols()}));
  if (svd.rank() == 0) throw std::invalid_argument("fit: data matrix has rank zero");
  return fit(solver, x, svd, cfg);
}

double explained_variance(const Matrix& x, const Matrix& z) {
  const double total = frobenius_norm(x);
  if (total == 0.0) throw std::invalid_argument("explained_variance: X is zero");
  if (z.cols() != x.cols()) throw std::invalid_argument("explained_variance: Z has wrong width");
  // X·pinv(Z)·Z
  const Matrix projected = matmul(matmul(x, pinv(z)), z);
  const double resid = frobenius_distance(x, projected);
  return 100.0 * (1.0 - (resid * resid) / (total * total));
}

double dissociated_energy(const DpcaFactorization& f) {
  const double v = frobenius_norm(f.V);
  return v * v;
}

}  // namespace dpca
