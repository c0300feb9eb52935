#include "sessrec/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sessrec {

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols != v.size()) {
    throw std::invalid_argument("matvec: matrix has " + std::to_string(m.cols) +
                                " cols, vector has " + std::to_string(v.size()));
  }
  Vector out(m.rows, 0.0);
  const double* row = m.data.data();
  for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
  if (m.rows != v.size()) {
    throw std::invalid_argument("matvec_transposed: matrix has " +
                                std::to_string(m.rows) + " rows, vector has " +
                                std::to_string(v.size()));
  }
  Vector out(m.cols, 0.0);
  const double* row = m.data.data();
  for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
  }
  return out;
}

void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
  if (acc.rows != u.size() || acc.cols != v.size()) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  double* row = acc.data.data();
  for (std::size_t i = 0; i < acc.rows; ++i, row += acc.cols) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    for (std::size_t j = 0; j < acc.cols; ++j) row[j] += ui * v[j];
  }
}

Vector column(const Matrix& m, std::size_t j) {
  if (j >= m.cols) throw std::out_of_range("column: index out of range");
  Vector out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = m.data[i * m.cols + j];
  return out;
}

void add_column(Matrix& m, std::size_t j, const Vector& v) {
  if (j >= m.cols) throw std::out_of_range("add_column: index out of range");
  if (v.size() != m.rows) throw std::invalid_argument("add_column: length mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) m.data[i * m.cols + j] += v[i];
}

double row_dot(const Matrix& m, std::size_t i, const Vector& v) {
  if (i >= m.rows) throw std::out_of_range("row_dot: index out of range");
  if (v.size() != m.cols) throw std::invalid_argument("row_dot: length mismatch");
  const double* row = m.data.data() + i * m.cols;
  double acc = 0.0;
  for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
  return acc;
}

void add_row(Matrix& m, std::size_t i, double a, const Vector& v) {
  if (i >= m.rows) throw std::out_of_range("add_row: index out of range");
  if (v.size() != m.cols) throw std::invalid_argument("add_row: length mismatch");
  double* row = m.data.data() + i * m.cols;
  for (std::size_t j = 0; j < m.cols; ++j) row[j] += a * v[j];
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sigmoid(double x) {
  // Split on sign so exp() never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector tanh_vec(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) {
  for (double x : m.data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace sessrec
