#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fbgs {

using Vector = std::vector<double>;

/// Compressed sparse row matrix. Column indices are sorted and unique per row.
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  /// Entry (i, j) or 0 when not stored.
  double at(int i, int j) const;
  /// Diagonal entries (0 where missing).
  Vector diagonal() const;
  CsrMatrix transpose() const;
  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  Vector multiply(std::span<const double> x) const;
  /// y = A^T x, computed without forming the transpose.
  void multiply_transpose(std::span<const double> x, std::span<double> y) const;
  /// Max abs entry.
  double max_abs() const;
  bool all_finite() const;

  static CsrMatrix identity(int n);
  /// Dense row-major input; entries with |a| <= drop are skipped.
  static CsrMatrix from_dense(int rows, int cols, std::span<const double> a, double drop = 0.0);
  std::vector<double> to_dense() const;
};

/// Accumulates (i, j, v) contributions; duplicates are summed in insertion
/// order so the result is deterministic.
class TripletBuilder {
 public:
  TripletBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}
  void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
  void reserve(std::size_t n) { entries_.reserve(n); }
  CsrMatrix build() const;

 private:
  struct Entry {
    int i, j;
    double v;
  };
  int rows_, cols_;
  std::vector<Entry> entries_;
};

/// A + B (same shape).
CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b, double beta = 1.0);
/// A * B
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

/// Matrix Market coordinate (real general) output.
void write_matrix_market(const CsrMatrix& a, const std::string& path);

}  // namespace fbgs
