#pragma once

#include <cstddef>
#include <vector>

namespace sessrec {

// All numeric state is 64-bit. Everything above this header (cell, losses,
// trainer) is expressed in these primitives.

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// m * v. Throws std::invalid_argument on dimension mismatch.
Vector matvec(const Matrix& m, const Vector& v);

/// m^T * v (no transposed copy is made).
Vector matvec_transposed(const Matrix& m, const Vector& v);

/// acc += u * v^T, where u has acc.rows entries and v has acc.cols.
void add_outer(Matrix& acc, const Vector& u, const Vector& v);

/// Copy of column j.
Vector column(const Matrix& m, std::size_t j);

/// m[:, j] += v.
void add_column(Matrix& m, std::size_t j, const Vector& v);

/// dot(row i of m, v).
double row_dot(const Matrix& m, std::size_t i, const Vector& v);

/// m[i, :] += a * v.
void add_row(Matrix& m, std::size_t i, double a, const Vector& v);

double dot(const Vector& a, const Vector& b);

/// Numerically stable logistic sigmoid; output in (0,1).
double sigmoid(double x);
Vector sigmoid(const Vector& v);

Vector tanh_vec(const Vector& v);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace sessrec
