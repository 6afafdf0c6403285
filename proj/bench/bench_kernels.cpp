#include <benchmark/benchmark.h>

#include "fbgs/config.hpp"
#include "fbgs/kernels.hpp"
#include "fbgs/kkt.hpp"
#include "fbgs/mesh.hpp"

#ifndef FBGS_SOURCE_DIR
#define FBGS_SOURCE_DIR "."
#endif

using namespace fbgs;

namespace {

const Mesh& bench_mesh() {
  static const Mesh mesh = [] {
    Mesh m = load_mesh(FBGS_SOURCE_DIR "/data/synthetic_tokamak.msh", default_region_map());
    return refine_uniform(refine_uniform(m).mesh).mesh;
  }();
  return mesh;
}

const CsrMatrix& bench_matrix() {
  static const CsrMatrix a = assemble_system_matrix(bench_mesh(), 1.25663706144e-6, {});
  return a;
}

Vector ramp(std::size_t n) {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 97);
  return v;
}

template <bool Parallel>
void BM_spmv(benchmark::State& st) {
  const CsrMatrix& a = bench_matrix();
  const Vector x = ramp(a.cols);
  Vector y(a.rows);
  for (auto _ : st) {
    if (Parallel) kernels::spmv(a, x, y);
    else kernels::reference::spmv(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_dot(benchmark::State& st) {
  const Vector x = ramp(1 << 20), y = ramp(1 << 20);
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? kernels::dot(x, y) : kernels::reference::dot(x, y));
}

template <bool Parallel>
void BM_jacobi(benchmark::State& st) {
  const CsrMatrix& a = bench_matrix();
  Vector inv = a.diagonal();
  for (double& v : inv) v = 1.0 / v;
  const Vector b = ramp(a.rows);
  Vector x(a.rows, 0.0), w(a.rows);
  for (auto _ : st) {
    if (Parallel) kernels::jacobi_sweep(a, inv, b, x, w);
    else kernels::reference::jacobi_sweep(a, inv, b, x, w);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Parallel>
void BM_l1_gs(benchmark::State& st) {
  const CsrMatrix& a = bench_matrix();
  const Vector inv = kernels::l1_block_inverse_diagonal(a, 256);
  const Vector b = ramp(a.rows);
  Vector x(a.rows, 0.0), w(a.rows);
  for (auto _ : st) {
    if (Parallel) kernels::l1_gs_sweep(a, inv, 256, false, b, x, w);
    else kernels::reference::l1_gs_sweep(a, inv, 256, false, b, x, w);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Parallel>
void BM_element_stiffness(benchmark::State& st) {
  const Mesh& m = bench_mesh();
  for (auto _ : st) {
    auto k = Parallel ? kernels::element_stiffness(m, 1.25663706144e-6)
                      : kernels::reference::element_stiffness(m, 1.25663706144e-6);
    benchmark::DoNotOptimize(k.data());
  }
}

}  // namespace

BENCHMARK(BM_spmv<false>)->Name("spmv/serial");
BENCHMARK(BM_spmv<true>)->Name("spmv/openmp");
BENCHMARK(BM_dot<false>)->Name("dot/serial");
BENCHMARK(BM_dot<true>)->Name("dot/openmp");
BENCHMARK(BM_jacobi<false>)->Name("jacobi_sweep/serial");
BENCHMARK(BM_jacobi<true>)->Name("jacobi_sweep/openmp");
BENCHMARK(BM_l1_gs<false>)->Name("l1_gs_sweep/serial");
BENCHMARK(BM_l1_gs<true>)->Name("l1_gs_sweep/openmp");
BENCHMARK(BM_element_stiffness<false>)->Name("element_stiffness/serial");
BENCHMARK(BM_element_stiffness<true>)->Name("element_stiffness/openmp");

BENCHMARK_MAIN();
