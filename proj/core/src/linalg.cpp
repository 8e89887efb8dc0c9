#include "dpca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dpca {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSweeps = 100;

// Rotation (c, s) zeroing the off-diagonal entry of [[app, apq], [apq, aqq]].
struct Rotation {
  double c;
  double s;
  double t;
};

Rotation schur2(double app, double aqq, double apq) {
  const double theta = (aqq - app) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  return {c, t * c, t};
}

void sort_descending(std::vector<double>& values, Matrix& vectors) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> sorted(n);
  Matrix v(vectors.rows(), n);
  for (std::size_t j = 0; j < n; ++j) {
    sorted[j] = values[order[j]];
    for (std::size_t i = 0; i < vectors.rows(); ++i) v(i, j) = vectors(i, order[j]);
  }
  values = std::move(sorted);
  vectors = std::move(v);
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& input) {
  if (input.rows() != input.cols()) throw std::invalid_argument("symmetric_eigen: matrix not square");
  require_finite(input, "symmetric_eigen");
  const std::size_t n = input.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = input(i, j);
  Matrix v = Matrix::identity(n);

  const double scale = std::max(frobenius_norm(a), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= kEps * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= kEps * 1e-3 * scale) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const auto [c, s, t] = schur2(app, aqq, apq);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          const double nkp = c * akp - s * akq;
          const double nkq = s * akp + c * akq;
          a(k, p) = a(p, k) = nkp;
          a(k, q) = a(q, k) = nkq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = std::move(v);
  sort_descending(out.values, out.vectors);
  return out;
}

Matrix SvdFactors::reconstruct() const {
  Matrix scaled = Z;
  for (std::size_t k = 0; k < scaled.rows(); ++k)
    for (double& v : scaled.row(k)) v *= D[k];
  return matmul(U, scaled);
}

void orthonormalize_rows(Matrix& m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      auto ri = m.row(i);
      const double before = norm2(ri);
      for (std::size_t j = 0; j < i; ++j) {
        auto rj = m.row(j);
        const double proj = dot(ri, rj);
        for (std::size_t c = 0; c < ri.size(); ++c) ri[c] -= proj * rj[c];
      }
      const double nrm = norm2(ri);
      if (nrm > 1e-10 * before) {
        for (double& v : ri) v /= nrm;
      } else {
        std::fill(ri.begin(), ri.end(), 0.0);
      }
    }
  }
}

SvdFactors truncated_svd(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (k < 1 || k > std::min(n, p)) {
    throw std::invalid_argument("truncated_svd: K=" + std::to_string(k) + " outside [1, " +
                                std::to_string(std::min(n, p)) + "]");
  }
  require_finite(x, "truncated_svd");

  const bool tall = n >= p;
  const Matrix gram = tall ? matmul_tn(x, x) : matmul_nt(x, x);
  SymmetricEigen eig = symmetric_eigen(gram);

  // Eigenvalues of the Gram matrix carry absolute error ~ m·ε·λ₁, so anything
  // below that floor is indistinguishable from zero.
  const double lambda1 = std::max(eig.values.front(), 0.0);
  const double floor =
      std::max(kRankTolerance * kRankTolerance, static_cast<double>(gram.rows()) * kEps) * lambda1;
  std::size_t rank = 0;
  while (rank < k && lambda1 > 0.0 && eig.values[rank] > floor) ++rank;

  SvdFactors out;
  out.requested = k;
  out.D.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) out.D[i] = std::sqrt(eig.values[i]);

  Matrix basis(rank, gram.rows());  // leading eigenvectors as rows
  for (std::size_t i = 0; i < rank; ++i)
    for (std::size_t j = 0; j < gram.rows(); ++j) basis(i, j) = eig.vectors(j, i);

  if (tall) {
    out.Z = std::move(basis);
    // U = X W D⁻¹, built as (Z Xᵀ)ᵀ row by row then orthonormalized.
    Matrix ut = matmul_nt(out.Z, x);
    for (std::size_t i = 0; i < rank; ++i)
      for (double& v : ut.row(i)) v /= out.D[i];
    orthonormalize_rows(ut);
    out.U = ut.transposed();
  } else {
    // Z = D⁻¹ Uᵀ X
    Matrix z = matmul(basis, x);
    for (std::size_t i = 0; i < rank; ++i)
      for (double& v : z.row(i)) v /= out.D[i];
    orthonormalize_rows(z);
    out.Z = std::move(z);
    out.U = basis.transposed();
  }

  for (std::size_t j = 0; j < rank; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(out.U(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (out.U(arg, j) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) out.U(i, j) = -out.U(i, j);
      for (double& v : out.Z.row(j)) v = -v;
    }
  }
  return out;
}

ThinSvd jacobi_svd(const Matrix& m) {
  require_finite(m, "jacobi_svd");
  const bool tall = m.rows() >= m.cols();
  // Rows of `w` are the vectors being mutually orthogonalized.
  Matrix w = tall ? m.transposed() : m;
  const std::size_t count = w.rows();
  Matrix v = Matrix::identity(count);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      for (std::size_t j = i + 1; j < count; ++j) {
        auto wi = w.row(i);
        auto wj = w.row(j);
        const double alpha = dot(wi, wi);
        const double beta = dot(wj, wj);
        const double gamma = dot(wi, wj);
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const auto [c, s, t] = schur2(alpha, beta, gamma);
        (void)t;
        for (std::size_t k = 0; k < wi.size(); ++k) {
          const double a = wi[k];
          const double b = wj[k];
          wi[k] = c * a - s * b;
          wj[k] = s * a + c * b;
        }
        auto vi = v.row(i);
        auto vj = v.row(j);
        for (std::size_t k = 0; k < count; ++k) {
          const double a = vi[k];
          const double b = vj[k];
          vi[k] = c * a - s * b;
          vj[k] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(count);
  for (std::size_t i = 0; i < count; ++i) sigma[i] = norm2(w.row(i));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  // w rows are σ_i·u_iᵀ and v rows are v_iᵀ (tall orientation).
  const std::size_t len = w.cols();
  Matrix left(len, count);
  Matrix right(count, count);
  ThinSvd out;
  out.S.resize(count);
  for (std::size_t jj = 0; jj < count; ++jj) {
    const std::size_t j = order[jj];
    out.S[jj] = sigma[j];
    for (std::size_t k = 0; k < len; ++k) left(k, jj) = sigma[j] > 0.0 ? w(j, k) / sigma[j] : 0.0;
    for (std::size_t k = 0; k < count; ++k) right(k, jj) = v(j, k);
  }
  if (tall) {
    out.U = std::move(left);
    out.V = std::move(right);
  } else {
    out.U = std::move(right);
    out.V = std::move(left);
  }
  return out;
}

Matrix pinv(const Matrix& m) {
  require_finite(m, "pinv");
  if (m.empty()) return Matrix(m.cols(), m.rows());
  const ThinSvd svd = jacobi_svd(m);
  const double smax = svd.S.empty() ? 0.0 : svd.S.front();
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * kEps * smax;
  Matrix out(m.cols(), m.rows());
  for (std::size_t k = 0; k < svd.S.size(); ++k) {
    if (svd.S[k] <= tol || svd.S[k] == 0.0) continue;
    const double inv = 1.0 / svd.S[k];
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vik = svd.V(i, k) * inv;
      if (vik == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < m.rows(); ++j) orow[j] += vik * svd.U(j, k);
    }
  }
  return out;
}

Cholesky::Cholesky(const Matrix& spd) : lower_(spd.rows(), spd.cols()) {
  if (spd.rows() != spd.cols()) throw std::invalid_argument("Cholesky: matrix not square");
  const std::size_t n = spd.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double diag = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower_(j, k) * lower_(j, k);
    if (!(diag > 0.0)) throw std::domain_error("Cholesky: matrix not positive definite");
    const double ljj = std::sqrt(diag);
    lower_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
      lower_(i, j) = s / ljj;
    }
  }
}

std::vector<double> Cholesky::solve(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw std::invalid_argument("Cholesky::solve: length mismatch");
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= lower_(i, k) * y[k];
    y[i] /= lower_(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= lower_(k, ii) * y[k];
    y[ii] /= lower_(ii, ii);
  }
  return y;
}

}  // namespace dpca
