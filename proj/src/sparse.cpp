#include "fbgs/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "fbgs/error.hpp"
#include "fbgs/kernels.hpp"

namespace fbgs {

double CsrMatrix::at(int i, int j) const {
  const auto begin = col_idx.begin() + row_ptr[i];
  const auto end = col_idx.begin() + row_ptr[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[it - col_idx.begin()];
}

Vector CsrMatrix::diagonal() const {
  Vector d(std::min(rows, cols), 0.0);
  for (int i = 0; i < static_cast<int>(d.size()); ++i) d[i] = at(i, i);
  return d;
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (int c : col_idx) ++t.row_ptr[c + 1];
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<int> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // rows visited in increasing order, so each transposed row stays sorted
  for (int i = 0; i < rows; ++i) {
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const int dst = next[col_idx[k]]++;
      t.col_idx[dst] = i;
      t.values[dst] = values[k];
    }
  }
  return t;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  kernels::spmv(*this, x, y);
}

Vector CsrMatrix::multiply(std::span<const double> x) const {
  Vector y(rows);
  multiply(x, y);
  return y;
}

void CsrMatrix::multiply_transpose(std::span<const double> x, std::span<double> y) const {
  std::fill(y.begin(), y.end(), 0.0);
  for (int i = 0; i < rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) y[col_idx[k]] += values[k] * xi;
  }
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

bool CsrMatrix::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

CsrMatrix CsrMatrix::identity(int n) {
  CsrMatrix a;
  a.rows = a.cols = n;
  a.row_ptr.resize(n + 1);
  a.col_idx.resize(n);
  a.values.assign(n, 1.0);
  for (int i = 0; i <= n; ++i) a.row_ptr[i] = i;
  std::iota(a.col_idx.begin(), a.col_idx.end(), 0);
  return a;
}

CsrMatrix CsrMatrix::from_dense(int rows, int cols, std::span<const double> a, double drop) {
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = a[static_cast<std::size_t>(i) * cols + j];
      if (std::abs(v) > drop) {
        m.col_idx.push_back(j);
        m.values.push_back(v);
      }
    }
    m.row_ptr[i + 1] = static_cast<int>(m.col_idx.size());
  }
  return m;
}

std::vector<double> CsrMatrix::to_dense() const {
  std::vector<double> d(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int i = 0; i < rows; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      d[static_cast<std::size_t>(i) * cols + col_idx[k]] += values[k];
  return d;
}

CsrMatrix TripletBuilder::build() const {
  CsrMatrix m;
  m.rows = rows_;
  m.cols = cols_;
  m.row_ptr.assign(rows_ + 1, 0);
  for (const auto& e : entries_) {
    if (e.i < 0 || e.i >= rows_ || e.j < 0 || e.j >= cols_)
      throw Error("TripletBuilder: index out of range");
    ++m.row_ptr[e.i + 1];
  }
  std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
  // counting sort by row keeps insertion order within a row
  std::vector<int> order(entries_.size());
  std::vector<int> next(m.row_ptr.begin(), m.row_ptr.end() - 1);
  for (int k = 0; k < static_cast<int>(entries_.size()); ++k) order[next[entries_[k].i]++] = k;

  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<int> new_ptr(rows_ + 1, 0);
  std::vector<int> slot(cols_, -1);
  for (int i = 0; i < rows_; ++i) {
    const int row_begin = static_cast<int>(cols.size());
    for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
      const auto& e = entries_[order[k]];
      if (slot[e.j] < 0) {
        slot[e.j] = static_cast<int>(cols.size());
        cols.push_back(e.j);
        vals.push_back(e.v);
      } else {
        vals[slot[e.j]] += e.v;
      }
    }
    // sort this row by column
    const int n = static_cast<int>(cols.size()) - row_begin;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return cols[row_begin + a] < cols[row_begin + b]; });
    std::vector<int> c2(n);
    std::vector<double> v2(n);
    for (int k = 0; k < n; ++k) {
      c2[k] = cols[row_begin + perm[k]];
      v2[k] = vals[row_begin + perm[k]];
    }
    for (int k = 0; k < n; ++k) {
      slot[c2[k]] = -1;
      cols[row_begin + k] = c2[k];
      vals[row_begin + k] = v2[k];
    }
    new_ptr[i + 1] = static_cast<int>(cols.size());
  }
  m.row_ptr = std::move(new_ptr);
  m.col_idx = std::move(cols);
  m.values = std::move(vals);
  return m;
}

CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b, double beta) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error("add: shape mismatch");
  CsrMatrix c;
  c.rows = a.rows;
  c.cols = a.cols;
  c.row_ptr.assign(a.rows + 1, 0);
  c.col_idx.reserve(a.nnz() + b.nnz());
  c.values.reserve(a.nnz() + b.nnz());
  for (int i = 0; i < a.rows; ++i) {
    int ka = a.row_ptr[i], kb = b.row_ptr[i];
    const int ea = a.row_ptr[i + 1], eb = b.row_ptr[i + 1];
    while (ka < ea || kb < eb) {
      const int ja = ka < ea ? a.col_idx[ka] : a.cols;
      const int jb = kb < eb ? b.col_idx[kb] : b.cols;
      if (ja == jb) {
        c.col_idx.push_back(ja);
        c.values.push_back(a.values[ka++] + beta * b.values[kb++]);
      } else if (ja < jb) {
        c.col_idx.push_back(ja);
        c.values.push_back(a.values[ka++]);
      } else {
        c.col_idx.push_back(jb);
        c.values.push_back(beta * b.values[kb++]);
      }
    }
    c.row_ptr[i + 1] = static_cast<int>(c.col_idx.size());
  }
  return c;
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols != b.rows) throw Error("multiply: shape mismatch");
  CsrMatrix c;
  c.rows = a.rows;
  c.cols = b.cols;
  c.row_ptr.assign(a.rows + 1, 0);
  std::vector<double> acc(b.cols, 0.0);
  std::vector<int> mark(b.cols, -1);
  std::vector<int> touched;
  for (int i = 0; i < a.rows; ++i) {
    touched.clear();
    for (int ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
      const int k = a.col_idx[ka];
      const double av = a.values[ka];
      for (int kb = b.row_ptr[k]; kb < b.row_ptr[k + 1]; ++kb) {
        const int j = b.col_idx[kb];
        if (mark[j] != i) {
          mark[j] = i;
          acc[j] = 0.0;
          touched.push_back(j);
        }
        acc[j] += av * b.values[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int j : touched) {
      c.col_idx.push_back(j);
      c.values.push_back(acc[j]);
    }
    c.row_ptr[i + 1] = static_cast<int>(c.col_idx.size());
  }
  return c;
}

void write_matrix_market(const CsrMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  for (int i = 0; i < a.rows; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      out << i + 1 << ' ' << a.col_idx[k] + 1 << ' ' << a.values[k] << '\n';
}

}  // namespace fbgs
