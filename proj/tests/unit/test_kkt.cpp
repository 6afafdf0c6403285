#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fbgs/error.hpp"
#include "fbgs/kkt.hpp"
#include "fixtures.hpp"

using namespace fbgs;

namespace {

// reduced solve by dense assembly of the operator, for arbitrary blocks
Step dense_reduced(const KktBlocks& k, const KktResidual& b) {
  const ReducedSystem rs = reduce(k, b);
  const int n = rs.size();
  Eigen::MatrixXd R(2 * n, 2 * n);
  Vector e(2 * n, 0.0), col(2 * n);
  for (int j = 0; j < 2 * n; ++j) {
    e[j] = 1.0;
    rs.apply(e, col);
    for (int i = 0; i < 2 * n; ++i) R(i, j) = col[i];
    e[j] = 0.0;
  }
  const Vector rhs = rs.rhs();
  const Eigen::VectorXd x = R.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), 2 * n));
  const Vector dp(x.data(), x.data() + n), dy(x.data() + n, x.data() + 2 * n);
  return back_substitute(dy, dp, b, k);
}

/// B(y, alpha) = A y + c y^2 + alpha, C = sum y_i / (i + 1) + c_a alpha,
/// G = 1/2 sum over the first rows of (y - 1/2)^2. The (1,1) block carries the
/// multiplier-weighted curvature 2 c p, so Newton is exact.
class QuadraticSystem : public KktSystem {
 public:
  static constexpr int n = 40, m = 3, observed = 10;
  static constexpr double c = 0.05, c_a = 2.0, target = 3.0;

  QuadraticSystem() {
    TripletBuilder a(n, n), f(n, m);
    for (int i = 0; i < n; ++i) {
      a.add(i, i, 2.5);
      if (i > 0) a.add(i, i - 1, -1.0);
      if (i + 1 < n) a.add(i, i + 1, -1.0);
      f.add(i, i % m, 1.0 + 0.1 * i);
    }
    A_ = a.build();
    F_ = f.build();
  }

  KktBlocks evaluate(const SolverState& s) const override {
    KktBlocks k;
    TripletBuilder by(n, n), gyy(n, n);
    for (int i = 0; i < n; ++i)
      for (int q = A_.row_ptr[i]; q < A_.row_ptr[i + 1]; ++q)
        by.add(i, A_.col_idx[q], A_.values[q] + (A_.col_idx[q] == i ? 2 * c * s.y[i] : 0.0));
    k.B_y = by.build();
    k.amg_matrix = k.B_y;
    k.F = F_;
    k.H.assign(m, 1e-2);
    k.B_alpha.assign(n, 1.0);
    k.C_y.assign(n, 0.0);
    k.B = A_.multiply(s.y);
    k.G_y.assign(n, 0.0);
    k.C = c_a * s.alpha;
    for (int i = 0; i < n; ++i) {
      k.B[i] += c * s.y[i] * s.y[i] + s.alpha;
      k.C_y[i] = 1.0 / (1 + i);
      k.C += k.C_y[i] * s.y[i];
      const double obs = i < observed ? 1.0 : 0.0;
      k.G_y[i] = obs * (s.y[i] - 0.5);
      k.G += 0.5 * obs * (s.y[i] - 0.5) * (s.y[i] - 0.5);
      gyy.add(i, i, obs + 2 * c * s.p[i]);
    }
    k.G_yy = gyy.build();
    k.C_alpha = c_a;
    k.target = target;
    return k;
  }

 private:
  CsrMatrix A_, F_;
};

SolverState zero_state() {
  SolverState s;
  s.y.assign(QuadraticSystem::n, 0.0);
  s.p.assign(QuadraticSystem::n, 0.0);
  s.u.assign(QuadraticSystem::m, 0.0);
  return s;
}

NewtonConfig tight() {
  NewtonConfig c;
  c.abs_tol = 1e-12;
  c.eta_max = 1e-12;
  c.gamma = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("reduced solve matches the dense direct solve on random instances") {
  const test::KktOracleResult r = test::kkt_oracle(20, 2024);
  CHECK(r.max_rel_error <= 1e-10);
  CHECK(r.max_asymmetry <= 1e-12);
}

TEST_CASE("residual rows without multipliers") {
  std::mt19937_64 rng(5);
  test::DenseKkt d = test::random_kkt(rng, 6, 2);
  std::fill(d.state.p.begin(), d.state.p.end(), 0.0);
  d.state.lambda = 0.0;
  KktResidual b = kkt_residual(d.blocks, d.state);
  for (int i = 0; i < 6; ++i) CHECK(b.b1[i] == -d.blocks.G_y[i]);
  CHECK(b.b4 == 0.0);

  d = test::random_kkt(rng, 6, 2);
  std::fill(d.state.u.begin(), d.state.u.end(), 0.0);
  b = kkt_residual(d.blocks, d.state);
  const Eigen::VectorXd ftp = d.F.transpose() * Eigen::Map<const Eigen::VectorXd>(d.state.p.data(), 6);
  for (int j = 0; j < 2; ++j) CHECK(b.b2[j] == doctest::Approx(ftp(j)));
}

TEST_CASE("reduced blocks in the trivial cases") {
  std::mt19937_64 rng(6);
  test::DenseKkt d = test::random_kkt(rng, 6, 2);
  std::fill(d.blocks.C_y.begin(), d.blocks.C_y.end(), 0.0);
  std::fill(d.blocks.B_alpha.begin(), d.blocks.B_alpha.end(), 0.0);
  const double eps = 1e-3;
  std::fill(d.blocks.H.begin(), d.blocks.H.end(), eps);
  const KktResidual b = kkt_residual(d.blocks, d.state);
  const ReducedSystem rs = reduce(d.blocks, b);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector w(6), out(6), ref(6, 0.0);
  for (double& v : w) v = u(rng);
  rs.apply_B(w, out);
  d.blocks.B_y.multiply_transpose(w, ref);
  for (int i = 0; i < 6; ++i) CHECK(out[i] == ref[i]);
  rs.apply_C(w, out);
  const Eigen::VectorXd ffw = -(d.F * d.F.transpose()) * Eigen::Map<const Eigen::VectorXd>(w.data(), 6) / eps;
  for (int i = 0; i < 6; ++i) CHECK(out[i] == doctest::Approx(ffw(i)));
}

TEST_CASE("back substitution in the trivial cases") {
  std::mt19937_64 rng(8);
  test::DenseKkt d = test::random_kkt(rng, 5, 3);
  KktResidual b = kkt_residual(d.blocks, d.state);
  std::fill(b.b2.begin(), b.b2.end(), 0.0);
  b.b5 = 0.0;
  const Vector zero(5, 0.0);
  Step s = back_substitute(zero, zero, b, d.blocks);
  for (double v : s.du) CHECK(v == 0.0);
  CHECK(s.dalpha == 0.0);
  // dy orthogonal to C_y
  Vector dy(5, 0.0);
  dy[0] = d.blocks.C_y[1];
  dy[1] = -d.blocks.C_y[0];
  s = back_substitute(dy, zero, b, d.blocks);
  CHECK(s.dalpha == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("elimination rejects a vanishing C_alpha") {
  std::mt19937_64 rng(9);
  test::DenseKkt d = test::random_kkt(rng, 4, 1);
  d.blocks.C_alpha = 1e-16;
  const KktResidual b = kkt_residual(d.blocks, d.state);
  CHECK_THROWS_AS(reduce(d.blocks, b), SingularError);
  const Vector z(4, 0.0);
  CHECK_THROWS_AS(back_substitute(z, z, b, d.blocks), SingularError);
}

TEST_CASE("scaled solve unscales to the unscaled step") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 5; ++t) {
    const test::DenseKkt d = test::random_kkt(rng, 3 + t, 2);
    Scaling sc;
    sc.flux = 1.25e-6;
    sc.i_ref = 3e4;
    sc.alpha_ref = 0.2;
    sc.current = 1.5e7;
    const KktResidual b = kkt_residual(d.blocks, d.state);
    const Step scaled = unscale_step(dense_reduced(scale_blocks(d.blocks, sc), scale_residual(b, sc)), sc);
    const Eigen::VectorXd direct = test::kkt_matrix(d).fullPivLu().solve(test::stack(b));
    CHECK((test::stack(scaled) - direct).norm() <= 1e-8 * direct.norm());
  }
}

TEST_CASE("forcing term") {
  NewtonConfig c;
  c.gamma = 1.0;
  c.eta_max = 1.0;
  CHECK(forcing_term(0.5, 1.0, c) == doctest::Approx(0.325779).epsilon(1e-6));
  CHECK(forcing_term(3.0, 3.0, c) == 1.0);
  c.eta_max = 1e-6;
  CHECK(forcing_term(0.5, 1.0, c) == 1e-6);
  CHECK(forcing_term(3.0, 3.0, c) == 1e-6);
  CHECK_THROWS_AS(forcing_term(1.0, 0.0, c), DomainError);
}

TEST_CASE("Hessian kind names") {
  CHECK(parse_hessian("lagrangian") == HessianKind::lagrangian);
  CHECK(parse_hessian(to_string(HessianKind::gauss_newton)) == HessianKind::gauss_newton);
  CHECK_THROWS_AS(parse_hessian("bfgs"), Error);
}

TEST_CASE("Newton converges quadratically on a fabricated problem") {
  const QuadraticSystem sys;
  LinearSolverConfig lin;
  const NewtonResult r = newton_solve(sys, zero_state(), tight(), lin);
  REQUIRE(r.converged);
  CHECK(r.iterations <= 8);
  CHECK(r.constraint_error <= 1e-12);
  // fixed point: every block of the residual vanishes
  const KktResidual b = kkt_residual(sys.evaluate(r.state), r.state);
  CHECK(b.norm() <= 1e-12);
  // two AMG calls per preconditioner application
  CHECK(r.amg_calls == 2 * r.preconditioner_applications);

  // the logged residuals fall quadratically once close
  ConvergenceLog log;
  newton_solve(sys, zero_state(), tight(), lin, &log);
  std::vector<double> e;
  for (const LogRow& row : log.rows) e.push_back(row.residual_norm);
  REQUIRE(e.size() >= 4);
  const std::size_t k = e.size() - 2;  // last two steps
  CHECK(e[k] / (e[k - 1] * e[k - 1]) <= 10.0);

  // restarting from the solution takes no steps
  const NewtonResult again = newton_solve(sys, r.state, tight(), lin);
  CHECK(again.converged);
  CHECK(again.iterations == 0);
}

TEST_CASE("Newton reports the iteration of a failing linear solve") {
  const QuadraticSystem sys;
  LinearSolverConfig lin;
  lin.max_iters = 1;
  lin.restart = 1;
  try {
    newton_solve(sys, zero_state(), tight(), lin);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("Newton iteration 0") != std::string::npos);
  }
}
