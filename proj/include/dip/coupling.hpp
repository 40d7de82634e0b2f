#pragma once

#include <vector>

#include "dip/common.hpp"

namespace dip {

/// Sparse coupling matrix A_i in coordinate-triplet form, n_rows x n_cols.
/// Rows live in the shared coupling space; columns index local variables.
struct SparseCoupling {
  struct Entry {
    int row = 0;
    int col = 0;
    double value = 0.0;
  };

  int rows = 0;
  int cols = 0;
  std::vector<Entry> entries;

  SparseCoupling() = default;
  SparseCoupling(int n_rows, int n_cols) : rows(n_rows), cols(n_cols) {}

  void add(int row, int col, double value) { entries.push_back({row, col, value}); }

  /// A * x
  Vector apply(const Vector& x) const;

  /// A^T * y
  Vector apply_transpose(const Vector& y) const;

  /// Coupling rows that carry at least one structural nonzero, ascending.
  std::vector<int> nonzero_rows() const;

  /// Dense copy, for tests and the full-KKT assembly.
  Matrix dense() const;

  void validate() const;
};

}  // namespace dip
