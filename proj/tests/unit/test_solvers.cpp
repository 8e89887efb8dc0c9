#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dpca/linalg.hpp"
#include "dpca/solvers.hpp"
#include "dpca/synth.hpp"
#include "helpers.hpp"

using dpca::Matrix;
using dpca::Solver;

namespace {

Matrix rank_k(std::size_t n, std::size_t p, std::size_t k, std::uint64_t seed) {
  return dpca::matmul(testing::random_matrix(n, k, seed), testing::random_matrix(k, p, seed + 1));
}

dpca::DpcaConfig reduction_config(std::size_t k) {
  dpca::DpcaConfig cfg;
  cfg.K = k;
  cfg.firm = dpca::FirmThresholds::inert();
  return cfg;
}

double rel_error(const Matrix& x, const dpca::DpcaFactorization& f) {
  return dpca::frobenius_distance(x, f.reconstruct()) / dpca::frobenius_norm(x);
}

Matrix synth_matrix(std::uint64_t seed) {
  dpca::SynthConfig sc = dpca::SynthConfig::preset(dpca::OverlapPreset::moderate);
  sc.seed = seed;
  return dpca::center_columns(dpca::generate_scene(sc).X).matrix;
}

dpca::DpcaConfig synth_config() {
  dpca::DpcaConfig cfg;
  cfg.lambda = 0.67;
  cfg.scale_lambda = true;
  cfg.firm = dpca::FirmThresholds(0.12, 0.24);
  return cfg;
}

}  // namespace

TEST_CASE("solver names") {
  for (Solver s : {Solver::pca, Solver::dpca1a, Solver::dpca1b, Solver::dpca2})
    CHECK(dpca::parse_solver(dpca::to_string(s)) == s);
  CHECK_THROWS_AS(dpca::parse_solver("ica"), std::invalid_argument);
}

TEST_CASE("config validation") {
  dpca::DpcaConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lambda = 2.0;
  cfg.scale_lambda = true;
  CHECK(cfg.effective_lambda(4, 9) == doctest::Approx(12.0));
  const Matrix x = rank_k(10, 8, 2, 3);
  dpca::DpcaConfig no_firm;
  no_firm.K = 2;
  CHECK_THROWS_AS(dpca::fit(Solver::dpca1b, x, no_firm), std::invalid_argument);
}

TEST_CASE("PCA baseline") {
  const Matrix x = rank_k(12, 9, 3, 7);
  CHECK(dpca::frobenius_distance(dpca::fit_pca_baseline(x, 3).reconstruct(), x) <= 1e-8);

  const auto d = dpca::fit_pca_baseline(Matrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}}, 1);
  CHECK(std::abs(d.U(0, 0)) == doctest::Approx(1.0));
  CHECK(d.reconstruct()(0, 0) == doctest::Approx(3.0));

  const Matrix r = testing::random_matrix(10, 8, 8);
  const auto oracle = testing::gram_rank_k(testing::to_eigen(r), 4);
  CHECK((testing::to_eigen(dpca::fit_pca_baseline(r, 4).reconstruct()) - oracle).norm() < 1e-8);
}

TEST_CASE("reduction to PCA at zero penalty") {
  for (std::size_t k : {1u, 2u, 4u, 8u}) {
    const Matrix x = rank_k(60, 100, k, 10 * k);
    for (Solver s : {Solver::dpca1a, Solver::dpca1b, Solver::dpca2}) {
      CAPTURE(k);
      CAPTURE(dpca::to_string(s));
      CHECK(rel_error(x, dpca::fit(s, x, reduction_config(k))) <= 1e-6);
    }
  }
}

TEST_CASE("update_phi_row_plain") {
  const Matrix x = testing::random_matrix(6, 5, 12);
  const auto svd = dpca::truncated_svd(x, 3);
  const dpca::SeedBasis seed(svd);

  SUBCASE("zero penalty on the leading singular vector") {
    const auto u = svd.U.col(0);
    const auto up = dpca::update_phi_row_plain(u, x, seed, 0.0);
    CHECK(up.phi[0] == doctest::Approx(svd.D[0]));
    CHECK(std::abs(up.phi[1]) < 1e-10);
    CHECK(std::abs(up.phi[2]) < 1e-10);
    for (std::size_t j = 0; j < 5; ++j) CHECK(up.z[j] == doctest::Approx(svd.D[0] * svd.Z(0, j)));
  }
  SUBCASE("direction orthogonal to the column space") {
    const Matrix low = rank_k(6, 5, 2, 13);
    const auto s2 = dpca::truncated_svd(low, 2);
    const dpca::SeedBasis seed2(s2);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(testing::to_eigen(low).transpose());
    Eigen::VectorXd perp = lu.kernel().col(0).normalized();
    std::vector<double> u(perp.data(), perp.data() + perp.size());
    const auto up = dpca::update_phi_row_plain(u, low, seed2, 0.3);
    for (double v : up.z) CHECK(std::abs(v) < 1e-10);
  }
  SUBCASE("dense formula oracle") {
    const Matrix x4 = testing::random_matrix(4, 4, 14);
    const auto s4 = dpca::truncated_svd(x4, 4);
    const dpca::SeedBasis seed4(s4);
    const std::vector<double> u{0.5, -0.5, 0.5, 0.5};
    const auto up = dpca::update_phi_row_plain(u, x4, seed4, 0.5);
    const auto ex = testing::to_eigen(x4);
    const auto zq = testing::to_eigen(s4.Z);
    Eigen::RowVectorXd y = Eigen::Map<const Eigen::VectorXd>(u.data(), 4).transpose() * ex;
    for (Eigen::Index j = 0; j < y.size(); ++j) y(j) = dpca::soft_adaptive(y(j), 0.5);
    const Eigen::RowVectorXd phi = y * zq.transpose() * (zq * zq.transpose()).inverse();
    for (int i = 0; i < 4; ++i) CHECK(up.phi[i] == doctest::Approx(phi(i)).epsilon(1e-10));
  }
  CHECK(dpca::update_phi_row_plain(std::vector<double>(6, 0.0), x, seed, 1.0).dead);
}

TEST_CASE("phi descent") {
  const Matrix x = testing::random_matrix(8, 7, 15);
  const auto svd = dpca::truncated_svd(x, 3);
  const dpca::SeedBasis seed(svd);

  SUBCASE("single component matches the plain update") {
    const auto s1 = dpca::truncated_svd(x, 1);
    const dpca::SeedBasis seed1(s1);
    dpca::Workspace ws;
    ws.A = dpca::matmul_tn(s1.U, s1.U);
    ws.B = dpca::matmul_tn(s1.U, x);
    Matrix z(1, 7), phi(1, 1);
    dpca::run_phi_descent(ws, z, phi, seed1, 0.0, 1e-12, 50);
    const auto plain = dpca::update_phi_row_plain(s1.U.col(0), x, seed1, 0.0);
    for (std::size_t j = 0; j < 7; ++j) CHECK(z(0, j) == doctest::Approx(plain.z[j]).epsilon(1e-10));
  }
  SUBCASE("orthonormal U converges in one pass") {
    dpca::Workspace ws;
    ws.A = dpca::matmul_tn(svd.U, svd.U);
    ws.B = dpca::matmul_tn(svd.U, x);
    Matrix z(3, 7), phi(3, 3);
    const std::size_t passes = dpca::run_phi_descent(ws, z, phi, seed, 0.0, 1e-10, 10);
    CHECK(passes <= 2);
  }
  SUBCASE("objective decreases with correlated U") {
    Matrix u = svd.U;
    for (std::size_t r = 0; r < u.rows(); ++r) u(r, 1) = 0.6 * svd.U(r, 0) + 0.8 * svd.U(r, 1);
    dpca::Workspace ws;
    ws.A = dpca::matmul_tn(u, u);
    ws.B = dpca::matmul_tn(u, x);
    Matrix z(3, 7), phi(3, 3);
    double prev = dpca::frobenius_distance(x, dpca::matmul(u, z));
    for (int pass = 0; pass < 6; ++pass) {
      dpca::run_phi_descent(ws, z, phi, seed, 0.0, 0.0, 1);
      const double now = dpca::frobenius_distance(x, dpca::matmul(u, z));
      CHECK(now <= prev + 1e-12);
      prev = now;
    }
  }
}

TEST_CASE("psi updates") {
  const Matrix x = testing::random_matrix(9, 7, 16);
  const auto svd = dpca::truncated_svd(x, 3);
  const dpca::SeedBasis seed(svd);

  SUBCASE("PCA fixed point keeps the identity") {
    Matrix z = svd.Z;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 7; ++j) z(k, j) *= svd.D[k];
    dpca::Workspace ws;
    ws.A = dpca::matmul_nt(z, z);
    ws.B = dpca::matmul_nt(x, z);
    Matrix u = svd.U, psi = Matrix::identity(3);
    dpca::run_psi_descent(ws, u, psi, seed, 1e-12, 50);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(psi(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
  }
  SUBCASE("columns never exceed unit norm") {
    Matrix z = testing::random_matrix(3, 7, 17);
    dpca::Workspace ws;
    ws.A = dpca::matmul_nt(z, z);
    ws.B = dpca::matmul_nt(x, z);
    Matrix u = svd.U, psi = Matrix::identity(3);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto up = dpca::update_psi_col(k, ws, u, seed);
      CHECK(dpca::norm2(up.u) <= 1.0 + 1e-12);
    }
  }
  SUBCASE("residual update on an exact rank-1 residual") {
    const std::vector<double> a = svd.U.col(1);
    const auto zrow = svd.Z.row(2);
    Matrix e(9, 7);
    for (std::size_t r = 0; r < 9; ++r)
      for (std::size_t c = 0; c < 7; ++c) e(r, c) = 2.0 * a[r] * zrow[c];
    const auto up = dpca::update_psi_col_resid(0, e, seed, zrow);
    CHECK_FALSE(up.dead);
    CHECK(dpca::norm2(up.u) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(dpca::dot(up.u, a)) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("residual outside span(U_q) resets") {
    const Matrix low = rank_k(9, 7, 2, 18);
    const auto s2 = dpca::truncated_svd(low, 2);
    const dpca::SeedBasis seed2(s2);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(testing::to_eigen(low).transpose());
    const Eigen::VectorXd perp = lu.kernel().col(0).normalized();
    Matrix e(9, 7);
    for (int r = 0; r < 9; ++r) e(r, 0) = perp(r);
    const std::vector<double> zrow{1, 0, 0, 0, 0, 0, 0};
    CHECK(dpca::update_psi_col_resid(1, e, seed2, zrow).dead);
  }
  SUBCASE("random residual gives unit columns") {
    const Matrix e = testing::random_matrix(9, 7, 19);
    const Matrix zr = testing::random_matrix(1, 7, 20);
    const auto s4 = dpca::truncated_svd(testing::random_matrix(9, 7, 21), 4);
    const dpca::SeedBasis seed4(s4);
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(dpca::norm2(dpca::update_psi_col_resid(k, e, seed4, zr.row(0)).u) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("synthetic fits") {
  const Matrix x = synth_matrix(3);
  const auto svd = dpca::truncated_svd(x, 8);
  const auto cfg = synth_config();
  for (Solver s : {Solver::dpca1a, Solver::dpca1b, Solver::dpca2}) {
    CAPTURE(dpca::to_string(s));
    const auto f = dpca::fit(s, x, svd, cfg);
    CHECK(f.U.all_finite());
    CHECK(f.Z.all_finite());
    for (std::size_t k = 0; k < f.K(); ++k) {
      const double n = dpca::norm2(f.U.col(k));
      if (s == Solver::dpca2)
        CHECK((n == 0.0 || std::abs(n - 1.0) <= 1e-6));
      else
        CHECK(n <= 1.0 + 1e-6);
    }
    const double ev = dpca::explained_variance(x, f.Z);
    CHECK(ev >= 0.0);
    CHECK(ev <= 100.0 + 1e-8);
    if (f.converged) {
      double bound = 0.0;
      for (double d : svd.D) bound += d * d;
      CHECK(dpca::dissociated_energy(f) <= bound + 1e-6);
    }
    const auto again = dpca::fit(s, x, svd, cfg);
    CHECK(again.U == f.U);
    CHECK(again.Z == f.Z);
    CHECK(again.rel_change_trace == f.rel_change_trace);
  }
}

TEST_CASE("rank-1 fixed points of dpca1b and dpca2 coincide") {
  const Matrix x = synth_matrix(4);
  const auto svd = dpca::truncated_svd(x, 1);
  auto cfg = synth_config();
  cfg.K = 1;
  cfg.outer_tol = 1e-12;
  cfg.inner_tol = 1e-12;
  cfg.max_outer = 200;
  cfg.max_inner = 500;
  const auto a = dpca::fit(Solver::dpca1b, x, svd, cfg);
  const auto b = dpca::fit(Solver::dpca2, x, svd, cfg);
  CHECK(dpca::frobenius_distance(a.reconstruct(), b.reconstruct()) / dpca::frobenius_norm(b.reconstruct()) <= 1e-6);
}

TEST_CASE("sparsity grows with the penalty") {
  const Matrix x = synth_matrix(5);
  const auto svd = dpca::truncated_svd(x, 8);
  for (Solver s : {Solver::dpca1b, Solver::dpca2}) {
    std::size_t prev = 0;
    for (double lam : {0.0, 0.1, 0.5, 1.0}) {
      auto cfg = synth_config();
      cfg.lambda = lam;
      const auto f = dpca::fit(s, x, svd, cfg);
      std::size_t zeros = 0;
      for (double v : f.Z.data()) zeros += v == 0.0;
      CAPTURE(dpca::to_string(s));
      CAPTURE(lam);
      CHECK(zeros >= prev);
      prev = zeros;
    }
  }
}

TEST_CASE("explained_variance") {
  const Matrix x = rank_k(10, 6, 3, 30);
  const auto svd = dpca::truncated_svd(x, 3);
  CHECK(dpca::explained_variance(x, svd.Z) == doctest::Approx(100.0));
  const auto top2 = dpca::truncated_svd(x, 2);
  const double expect = 100.0 * (svd.D[0] * svd.D[0] + svd.D[1] * svd.D[1]) /
                        (svd.D[0] * svd.D[0] + svd.D[1] * svd.D[1] + svd.D[2] * svd.D[2]);
  CHECK(dpca::explained_variance(x, top2.Z) == doctest::Approx(expect).epsilon(1e-10));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(testing::to_eigen(x));
  const Eigen::MatrixXd ker = lu.kernel().transpose();
  CHECK(std::abs(dpca::explained_variance(x, testing::from_eigen(ker))) < 1e-8);
  CHECK_THROWS_AS(dpca::explained_variance(Matrix(3, 3), svd.Z.transposed()), std::invalid_argument);
}
