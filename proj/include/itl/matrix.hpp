#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace itl {

using Vector = std::vector<double>;

/// Dense row-major real matrix of arbitrary shape.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);
  static Matrix from_columns(const std::vector<Vector>& columns, std::size_t rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  Vector column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> v);

  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  /// Largest absolute entry (0 for an empty matrix).
  double max_abs() const;
  double frobenius() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

/// Aᵀ·x without forming the transpose.
Vector transpose_times(const Matrix& a, std::span<const double> x);
/// [A B] side by side.
Matrix hconcat(const Matrix& a, const Matrix& b);
/// (A + Aᵀ)/2 for square A.
Matrix symmetric_part(const Matrix& a);
/// max_ij |A_ij − B_ij|.
double max_abs_diff(const Matrix& a, const Matrix& b);

enum class SpdState { Unknown, VerifiedSpd, VerifiedNotSpd };

/// Dense symmetric matrix. Symmetry is enforced exactly by averaging at construction.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m, SpdState state = SpdState::Unknown);
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(std::span<const double> d);

  std::size_t size() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }

  SpdState spd_state() const noexcept { return state_; }
  /// Runs a Cholesky factorization and returns a copy marked verified-SPD; throws NotSPD.
  SymMatrix certified() const;

  double max_abs() const { return m_.max_abs(); }
  double trace() const;
  Vector diag() const;

 private:
  Matrix m_;
  SpdState state_ = SpdState::Unknown;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector a);
/// y += alpha·x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace itl
