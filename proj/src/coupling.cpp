#include "dip/coupling.hpp"

#include <algorithm>
#include <set>

namespace dip {

Vector SparseCoupling::apply(const Vector& x) const {
  if (x.size() != cols) {
    throw InstanceError("coupling apply: vector length " + std::to_string(x.size()) +
                        " does not match column count " + std::to_string(cols));
  }
  Vector y = Vector::Zero(rows);
  for (const Entry& e : entries) y[e.row] += e.value * x[e.col];
  return y;
}

Vector SparseCoupling::apply_transpose(const Vector& y) const {
  if (y.size() != rows) {
    throw InstanceError("coupling apply_transpose: vector length " + std::to_string(y.size()) +
                        " does not match row count " + std::to_string(rows));
  }
  Vector x = Vector::Zero(cols);
  for (const Entry& e : entries) x[e.col] += e.value * y[e.row];
  return x;
}

std::vector<int> SparseCoupling::nonzero_rows() const {
  std::set<int> seen;
  for (const Entry& e : entries) {
    if (e.value != 0.0) seen.insert(e.row);
  }
  return {seen.begin(), seen.end()};
}

Matrix SparseCoupling::dense() const {
  Matrix m = Matrix::Zero(rows, cols);
  for (const Entry& e : entries) m(e.row, e.col) += e.value;
  return m;
}

void SparseCoupling::validate() const {
  if (rows < 0 || cols < 0) throw InstanceError("coupling matrix with negative dimensions");
  for (const Entry& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw InstanceError("coupling triplet (" + std::to_string(e.row) + ", " +
                          std::to_string(e.col) + ") outside " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    }
    if (!std::isfinite(e.value)) throw InstanceError("non-finite coupling entry");
  }
}

}  // namespace dip
