#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version (namespace
// kernels) and a plain serial version (namespace kernels::reference) that the
// tests compare against. The parallel versions are deterministic: reductions
// use a fixed chunk decomposition independent of the thread count.

#include <array>
#include <span>

#include "fbgs/sparse.hpp"

namespace fbgs {
struct Mesh;
}

namespace fbgs::kernels {

int num_threads();

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
/// y = a x + b y
void axpby(double a, std::span<const double> x, double b, std::span<double> y);
/// x += inv_diag .* (b - A x), computed Jacobi style from the old x.
void jacobi_sweep(const CsrMatrix& a, std::span<const double> inv_diag,
                  std::span<const double> b, std::span<double> x,
                  std::span<double> work);

/// Hybrid l1 Gauss-Seidel: rows are split into consecutive blocks of
/// `block` rows; inside a block the sweep is Gauss-Seidel (forward or
/// backward), couplings to other blocks use the values from before the sweep.
/// inv_diag holds 1 / (a_ii + sum of |a_ij| over columns outside the block).
/// work receives the old x. The result does not depend on the thread count.
void l1_gs_sweep(const CsrMatrix& a, std::span<const double> inv_diag, int block, bool backward,
                 std::span<const double> b, std::span<double> x, std::span<double> work);

/// inv_diag for l1_gs_sweep; a negative diagonal keeps its sign.
Vector l1_block_inverse_diagonal(const CsrMatrix& a, int block);

using LocalMatrix = std::array<double, 9>;

/// Per-element local P1 stiffness with weight 1/(mu r) integrated by the
/// 3-point rule. Throws DomainError if a quadrature point has r < 1e-10.
std::vector<LocalMatrix> element_stiffness(const Mesh& mesh, double mu);

namespace reference {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpby(double a, std::span<const double> x, double b, std::span<double> y);
void jacobi_sweep(const CsrMatrix& a, std::span<const double> inv_diag,
                  std::span<const double> b, std::span<double> x,
                  std::span<double> work);
void l1_gs_sweep(const CsrMatrix& a, std::span<const double> inv_diag, int block, bool backward,
                 std::span<const double> b, std::span<double> x, std::span<double> work);
std::vector<LocalMatrix> element_stiffness(const Mesh& mesh, double mu);

}  // namespace reference

}  // namespace fbgs::kernels
