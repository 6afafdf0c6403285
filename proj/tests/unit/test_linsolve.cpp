#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbgs/error.hpp"
#include "fbgs/kernels.hpp"
#include "fbgs/linsolve.hpp"

using namespace fbgs;

namespace {

CsrMatrix laplace_1d(int n) {
  TripletBuilder t(n, n);
  for (int i = 0; i < n; ++i) {
    t.add(i, i, 2.0);
    if (i > 0) t.add(i, i - 1, -1.0);
    if (i + 1 < n) t.add(i, i + 1, -1.0);
  }
  return t.build();
}

// five-point Dirichlet Laplacian on a k x k interior grid, the P1 stiffness
// of the right-triangle mesh
CsrMatrix laplace_2d(int k) {
  const int n = k * k;
  TripletBuilder t(n, n);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) {
      const int r = j * k + i;
      t.add(r, r, 4.0);
      if (i > 0) t.add(r, r - 1, -1.0);
      if (i + 1 < k) t.add(r, r + 1, -1.0);
      if (j > 0) t.add(r, r - k, -1.0);
      if (j + 1 < k) t.add(r, r + k, -1.0);
    }
  return t.build();
}

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = u(rng);
  return a;
}

LinearOperator dense_op(const Eigen::MatrixXd& m) {
  return [m](std::span<const double> x, std::span<double> y) {
    Eigen::Map<Eigen::VectorXd>(y.data(), y.size()) = m * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  };
}

double norm(std::span<const double> v) { return kernels::norm2(v); }

void set_threads([[maybe_unused]] int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int cycles_to(const AmgHierarchy& amg, const CsrMatrix& a, std::span<const double> b, double tol) {
  Vector x(b.size(), 0.0), r(b.size());
  for (int c = 1; c <= 200; ++c) {
    amg.cycle(b, x);
    a.multiply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    if (norm(r) <= tol * norm(b)) return c;
  }
  return 1000;
}

}  // namespace

TEST_CASE("V-cycle on the 1D Laplacian") {
  const int n = 1023;
  const CsrMatrix a = laplace_1d(n);
  const AmgHierarchy amg(a, AmgConfig{});
  CHECK(amg.num_levels() >= 3);
  // Thomas solve for the reference solution
  const Vector b = random_vector(n, 1);
  std::vector<double> c(n), d(n), x(n);
  c[0] = -0.5;
  d[0] = b[0] / 2.0;
  for (int i = 1; i < n; ++i) {
    const double m = 2.0 + c[i - 1];
    c[i] = -1.0 / m;
    d[i] = (b[i] + d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];

  Vector it(n, 0.0), e(n);
  for (int k = 0; k < 10; ++k) amg.cycle(b, it);
  for (int i = 0; i < n; ++i) e[i] = it[i] - x[i];
  const double factor = std::pow(norm(e) / norm(x), 0.1);
  MESSAGE("1D V-cycle convergence factor " << factor);
  CHECK(factor <= 0.5);
}

TEST_CASE("cycle counts stay flat under refinement of the 2D Laplacian") {
  std::vector<int> counts;
  for (int k : {31, 63, 127}) {
    const CsrMatrix a = laplace_2d(k);
    const AmgHierarchy amg(a, AmgConfig{});
    counts.push_back(cycles_to(amg, a, random_vector(k * k, 2), 1e-8));
  }
  MESSAGE("cycles to 1e-8: " << counts[0] << " " << counts[1] << " " << counts[2]);
  CHECK(counts[1] < 1.5 * counts[0]);
  CHECK(counts[2] < 1.5 * counts[1]);
}

TEST_CASE("AMG on the identity is a single exact level") {
  TripletBuilder t(50, 50);
  for (int i = 0; i < 50; ++i) t.add(i, i, 1.0);
  const AmgHierarchy amg(t.build(), AmgConfig{});
  CHECK(amg.num_levels() == 1);
  const Vector r = random_vector(50, 3);
  const Vector z = amg.apply(r);
  for (int i = 0; i < 50; ++i) CHECK(z[i] == doctest::Approx(r[i]));
}

TEST_CASE("AMG application is linear") {
  const CsrMatrix a = laplace_2d(40);
  AmgConfig cfg;
  cfg.iterations = 3;
  const AmgHierarchy amg(a, cfg);
  const int n = a.rows;
  for (double v : amg.apply(Vector(n, 0.0))) CHECK(v == 0.0);
  const Vector r1 = random_vector(n, 4), r2 = random_vector(n, 5);
  Vector mix(n);
  for (int i = 0; i < n; ++i) mix[i] = 2.5 * r1[i] - 0.75 * r2[i];
  const Vector z1 = amg.apply(r1), z2 = amg.apply(r2), zm = amg.apply(mix);
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(zm[i] - (2.5 * z1[i] - 0.75 * z2[i])));
  CHECK(err <= 1e-12 * norm(zm));
}

TEST_CASE("AMG setup errors") {
  TripletBuilder t(3, 3);
  t.add(0, 0, 1.0);
  t.add(1, 2, 1.0);
  t.add(2, 2, 1.0);
  CHECK_THROWS_AS(AmgHierarchy(t.build(), AmgConfig{}), Error);
  CHECK_THROWS_AS(AmgHierarchy(CsrMatrix::from_dense(2, 3, std::vector<double>(6, 1.0)), AmgConfig{}), Error);
  CHECK_THROWS_AS(parse_cycle("F"), Error);
  CHECK(parse_cycle("W") == Cycle::W);
  CHECK_THROWS_AS(parse_block_kind("ILU"), Error);
  CHECK(to_string(parse_block_kind("BLT")) == "BLT");
}

TEST_CASE("AMG results do not depend on the thread count") {
  const CsrMatrix a = laplace_2d(90);
  const Vector r = random_vector(a.rows, 6);
  for (Cycle c : {Cycle::V, Cycle::W}) {
    AmgConfig cfg;
    cfg.cycle = c;
    cfg.iterations = 2;
    set_threads(1);
    const Vector z1 = AmgHierarchy(a, cfg).apply(r);
    set_threads(4);
    const Vector z4 = AmgHierarchy(a, cfg).apply(r);
    set_threads(1);
    CHECK(z1 == z4);
  }
}

TEST_CASE("FGMRES on dense oracles") {
  std::mt19937_64 rng(11);
  FgmresConfig cfg;
  cfg.tol = 1e-12;

  const Vector b = random_vector(50, 7);
  const FgmresResult id = fgmres([](std::span<const double> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
  }, nullptr, b, cfg);
  CHECK(id.converged);
  CHECK(id.iterations == 1);

  const Eigen::MatrixXd q = random_matrix(50, 50, rng);
  const Eigen::MatrixXd spd = q * q.transpose() + 5.0 * Eigen::MatrixXd::Identity(50, 50);
  const Eigen::Map<const Eigen::VectorXd> bb(b.data(), 50);
  const Eigen::VectorXd xs = spd.ldlt().solve(bb);
  const FgmresResult r = fgmres(dense_op(spd), nullptr, b, cfg);
  CHECK(r.converged);
  CHECK((Eigen::Map<const Eigen::VectorXd>(r.x.data(), 50) - xs).norm() <= 1e-9 * xs.norm());

  // a preconditioner that changes on every call
  const Eigen::MatrixXd ns = random_matrix(50, 50, rng) + 8.0 * Eigen::MatrixXd::Identity(50, 50);
  const Eigen::VectorXd xn = ns.fullPivLu().solve(bb);
  int calls = 0;
  const LinearOperator varying = [&](std::span<const double> x, std::span<double> y) {
    const double s = calls++ % 2 == 0 ? 1.0 / 8.0 : 1.0 / 5.0;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = s * x[i] * (1.0 + 0.1 * std::sin(double(i + calls)));
  };
  const FgmresResult f = fgmres(dense_op(ns), varying, b, cfg);
  CHECK(f.converged);
  CHECK(calls == f.iterations);
  CHECK((Eigen::Map<const Eigen::VectorXd>(f.x.data(), 50) - xn).norm() <= 1e-9 * xn.norm());

  FgmresConfig bad;
  bad.restart = 0;
  CHECK_THROWS_AS(fgmres(dense_op(spd), nullptr, b, bad), Error);
}

TEST_CASE("block preconditioners with exact inverses") {
  std::mt19937_64 rng(12);
  const int n = 15;
  const Eigen::MatrixXd B = random_matrix(n, n, rng) + 4.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd q = random_matrix(n, n, rng);
  const Eigen::MatrixXd A = q * q.transpose() / n;
  const Eigen::VectorXd f = random_matrix(n, 1, rng);
  const Eigen::MatrixXd C = -f * f.transpose() / 0.3;  // one coil
  Eigen::MatrixXd K(2 * n, 2 * n);
  K << B, A, C, B.transpose();
  const Eigen::MatrixXd Binv = B.inverse(), BTinv = B.transpose().inverse();

  auto make = [&](BlockKind kind, const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
    return BlockPreconditioner(kind, dense_op(Binv), dense_op(BTinv), dense_op(a), dense_op(c), n);
  };
  const Vector rhs = random_vector(2 * n, 8);
  FgmresConfig cfg;
  cfg.tol = 1e-10;
  for (BlockKind kind : {BlockKind::BD, BlockKind::BUT, BlockKind::BLT}) {
    CAPTURE(to_string(kind));
    const BlockPreconditioner pc = make(kind, A, C);
    const FgmresResult r = fgmres(dense_op(K), pc.as_operator(), rhs, cfg);
    CHECK(r.converged);
    if (kind == BlockKind::BD) CHECK(r.iterations <= 4);
    CHECK(pc.amg_calls() == 2 * pc.applications());
  }

  // a triangular variant reduces to BD when its coupling block vanishes
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
  Vector zbd(2 * n), zt(2 * n);
  make(BlockKind::BD, A, C).apply(rhs, zbd);
  make(BlockKind::BUT, zero, C).apply(rhs, zt);
  CHECK(zt == zbd);
  make(BlockKind::BLT, A, zero).apply(rhs, zt);
  CHECK(zt == zbd);
}
