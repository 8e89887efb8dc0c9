#pragma once

#include <Eigen/Dense>

#include "dpca/matrix.hpp"
#include "dpca/rng.hpp"

namespace testing {

inline dpca::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dpca::Rng rng(seed);
  dpca::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline Eigen::MatrixXd to_eigen(const dpca::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

inline dpca::Matrix from_eigen(const Eigen::MatrixXd& e) {
  dpca::Matrix m(e.rows(), e.cols());
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
  return m;
}

// Best rank-k approximation from the eigendecomposition of XᵀX.
inline Eigen::MatrixXd gram_rank_k(const Eigen::MatrixXd& x, Eigen::Index k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x);
  const Eigen::MatrixXd w = es.eigenvectors().rightCols(k);
  return x * w * w.transpose();
}

}  // namespace testing
