#pragma once

// Dense row-major matrix and the handful of BLAS-like kernels the solvers need.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace dpca {

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// `values` is row-major and must hold rows*cols entries.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> v);
  void set_row(std::size_t r, std::span<const double> v);

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }

  Matrix transposed() const;
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a * x
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
/// aᵀ * x  (equivalently xᵀ a as a row vector)
std::vector<double> matvec_t(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double frobenius_norm(const Matrix& a);
/// ‖a − b‖_F without materializing the difference.
double frobenius_distance(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

/// Throws std::invalid_argument naming `what` when any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

struct CenteredMatrix {
  Matrix matrix;
  std::vector<double> means;
};

/// Subtracts each column mean. The means are returned so callers can add them back.
CenteredMatrix center_columns(const Matrix& x);

}  // namespace dpca
