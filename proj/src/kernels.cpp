#include "fbgs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbgs/error.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs::kernels {

namespace {

constexpr int kReductionChunks = 64;
constexpr double kMinRadius = 1e-10;

LocalMatrix local_stiffness(const Mesh& mesh, int t, double mu) {
  const auto& tri = mesh.triangles[t];
  const Point a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
  const double area2 = (b.r - a.r) * (c.z - a.z) - (c.r - a.r) * (b.z - a.z);
  const double gr[3] = {(b.z - c.z) / area2, (c.z - a.z) / area2, (a.z - b.z) / area2};
  const double gz[3] = {(c.r - b.r) / area2, (a.r - c.r) / area2, (b.r - a.r) / area2};
  const auto& rule = quad::triangle_order2();
  double weight = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const auto& l = rule.points[q];
    const double r = l[0] * a.r + l[1] * b.r + l[2] * c.r;
    if (r < kMinRadius)
      throw DomainError("stiffness: quadrature point with r < r_min in element " + std::to_string(t));
    weight += rule.weights[q] / (mu * r);
  }
  weight *= 0.5 * area2;
  LocalMatrix k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[3 * i + j] = weight * (gr[i] * gr[j] + gz[i] * gz[j]);
  return k;
}

}  // namespace

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  const int n = a.rows;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.values[k] * x[a.col_idx[k]];
    y[i] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  const long n = static_cast<long>(x.size());
  double partial[kReductionChunks] = {};
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kReductionChunks; ++c) {
    const long begin = n * c / kReductionChunks;
    const long end = n * (c + 1) / kReductionChunks;
    double s = 0.0;
    for (long i = begin; i < end; ++i) s += x[i] * y[i];
    partial[c] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpby(double a, std::span<const double> x, double b, std::span<double> y) {
  const long n = static_cast<long>(y.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void jacobi_sweep(const CsrMatrix& a, std::span<const double> inv_diag,
                  std::span<const double> b, std::span<double> x, std::span<double> work) {
  const int n = a.rows;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s -= a.values[k] * x[a.col_idx[k]];
    work[i] = x[i] + inv_diag[i] * s;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) x[i] = work[i];
}

namespace {

void l1_gs_block(const CsrMatrix& a, std::span<const double> inv_diag, int lo, int hi, bool backward,
                 std::span<const double> b, std::span<double> x, std::span<const double> old) {
  for (int s = 0; s < hi - lo; ++s) {
    const int i = backward ? hi - 1 - s : lo + s;
    double r = b[i];
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const int j = a.col_idx[k];
      r -= a.values[k] * (j >= lo && j < hi ? x[j] : old[j]);
    }
    x[i] += inv_diag[i] * r;
  }
}

}  // namespace

Vector l1_block_inverse_diagonal(const CsrMatrix& a, int block) {
  if (block < 1) throw Error("l1 smoother: block size must be positive");
  Vector out(a.rows);
  for (int i = 0; i < a.rows; ++i) {
    const int lo = i / block * block, hi = std::min(a.rows, lo + block);
    double d = 0.0, off = 0.0;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const int j = a.col_idx[k];
      if (j == i) d += a.values[k];
      else if (j < lo || j >= hi) off += std::abs(a.values[k]);
    }
    const double l1 = d >= 0.0 ? d + off : d - off;
    if (l1 == 0.0) throw Error("l1 smoother: zero row " + std::to_string(i));
    out[i] = 1.0 / l1;
  }
  return out;
}

void l1_gs_sweep(const CsrMatrix& a, std::span<const double> inv_diag, int block, bool backward,
                 std::span<const double> b, std::span<double> x, std::span<double> work) {
  const int n = a.rows;
  const int nb = (n + block - 1) / block;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) work[i] = x[i];
#pragma omp parallel for schedule(static)
  for (int q = 0; q < nb; ++q) l1_gs_block(a, inv_diag, q * block, std::min(n, (q + 1) * block), backward, b, x, work);
}

std::vector<LocalMatrix> element_stiffness(const Mesh& mesh, double mu) {
  const int nt = mesh.num_triangles();
  std::vector<LocalMatrix> out(nt);
  std::string error;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < nt; ++t) {
    try {
      out[t] = local_stiffness(mesh, t, mu);
    } catch (const DomainError& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DomainError(error);
  return out;
}

namespace reference {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  for (int i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.values[k] * x[a.col_idx[k]];
    y[i] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpby(double a, std::span<const double> x, double b, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * x[i] + b * y[i];
}

void jacobi_sweep(const CsrMatrix& a, std::span<const double> inv_diag,
                  std::span<const double> b, std::span<double> x, std::span<double> work) {
  for (int i = 0; i < a.rows; ++i) {
    double s = b[i];
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s -= a.values[k] * x[a.col_idx[k]];
    work[i] = x[i] + inv_diag[i] * s;
  }
  std::copy(work.begin(), work.begin() + a.rows, x.begin());
}

void l1_gs_sweep(const CsrMatrix& a, std::span<const double> inv_diag, int block, bool backward,
                 std::span<const double> b, std::span<double> x, std::span<double> work) {
  const int n = a.rows;
  std::copy(x.begin(), x.begin() + n, work.begin());
  for (int lo = 0; lo < n; lo += block) l1_gs_block(a, inv_diag, lo, std::min(n, lo + block), backward, b, x, work);
}

std::vector<LocalMatrix> element_stiffness(const Mesh& mesh, double mu) {
  std::vector<LocalMatrix> out(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) out[t] = local_stiffness(mesh, t, mu);
  return out;
}

}  // namespace reference

}  // namespace fbgs::kernels
