#include "capnet/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace capnet {

namespace {

std::string vec_shape(std::size_t n) { return "[" + std::to_string(n) + "]"; }

void require_same_length(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + vec_shape(a.size()) +
                     " vs " + vec_shape(b.size()));
  }
}

}  // namespace

void Vector::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + shape_string() + " built from " +
                     std::to_string(data_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

Vector matmul(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matmul: matrix " + a.shape_string() + " times vector " +
                     vec_shape(x.size()));
  }
  Vector out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

Vector matmul_transposed(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) {
    throw ShapeError("matmul_transposed: matrix " + a.shape_string() +
                     " transposed times vector " + vec_shape(x.size()));
  }
  Vector out(a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * xr;
  }
  return out;
}

void add_outer(Matrix& m, const Vector& u, const Vector& v) {
  if (m.rows() != u.size() || m.cols() != v.size()) {
    throw ShapeError("add_outer: matrix " + m.shape_string() + " vs outer product " +
                     vec_shape(u.size()) + "x" + vec_shape(v.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ur * v[c];
  }
}

Vector softmax(const Vector& z) {
  if (z.empty()) throw ShapeError("softmax: empty input");
  const double mx = *std::max_element(z.begin(), z.end());
  Vector out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double neg_log_likelihood(const Vector& p, std::size_t target) {
  if (target >= p.size()) {
    throw IndexError("neg_log_likelihood: target " + std::to_string(target) +
                     " outside vocabulary of size " + std::to_string(p.size()));
  }
  return -std::log(std::max(p[target], kProbFloor));
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector tanh(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

Vector sigmoid(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_length(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector add(const Vector& a, const Vector& b) {
  require_same_length(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void add_inplace(Vector& a, const Vector& b) {
  require_same_length(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add_inplace: " + a.shape_string() + " vs " + b.shape_string());
  }
  auto dst = a.span();
  const auto src = b.span();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace capnet
