#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace capnet {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Dense vector of doubles. Activations, biases and embeddings all live here.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(double value);

  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  void fill(double value);

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Probability floor applied before every log.
inline constexpr double kProbFloor = 1e-12;

Vector matmul(const Matrix& a, const Vector& x);

/// a^T x without materializing the transpose.
Vector matmul_transposed(const Matrix& a, const Vector& x);

/// m += u v^T
void add_outer(Matrix& m, const Vector& u, const Vector& v);

/// Softmax with max subtraction.
Vector softmax(const Vector& z);

/// -ln max(p[target], kProbFloor)
double neg_log_likelihood(const Vector& p, std::size_t target);

Vector tanh(const Vector& x);
Vector sigmoid(const Vector& x);
Vector hadamard(const Vector& a, const Vector& b);
Vector add(const Vector& a, const Vector& b);

/// a += b
void add_inplace(Vector& a, const Vector& b);
void add_inplace(Matrix& a, const Matrix& b);

double sigmoid(double x);

bool all_finite(std::span<const double> values);

}  // namespace capnet
