#include "fbgs/linsolve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fbgs/error.hpp"
#include "fbgs/kernels.hpp"

namespace fbgs {

Cycle parse_cycle(const std::string& s) {
  if (s == "V" || s == "v") return Cycle::V;
  if (s == "W" || s == "w") return Cycle::W;
  throw Error("unknown AMG cycle '" + s + "' (expected V or W)");
}

std::string to_string(Cycle c) { return c == Cycle::V ? "V" : "W"; }

BlockKind parse_block_kind(const std::string& s) {
  if (s == "BD" || s == "bd") return BlockKind::BD;
  if (s == "BUT" || s == "but") return BlockKind::BUT;
  if (s == "BLT" || s == "blt") return BlockKind::BLT;
  throw Error("unknown preconditioner '" + s + "' (expected BD, BUT or BLT)");
}

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::BD: return "BD";
    case BlockKind::BUT: return "BUT";
    default: return "BLT";
  }
}

// ---------------------------------------------------------------- AMG

struct AmgHierarchy::Level {
  CsrMatrix a;
  Vector inv_l1;  // hybrid l1 Gauss-Seidel weights
  CsrMatrix p;    // prolongation to this level from the next coarser one
  CsrMatrix r;    // restriction, p^T
  mutable Vector res, work, bc, xc;
};

struct AmgHierarchy::Coarse {
  bool direct = false;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

namespace {

// Symmetrized strength graph without the diagonal.
std::vector<std::vector<int>> strength_graph(const CsrMatrix& a, double theta) {
  const int n = a.rows;
  const Vector d = a.diagonal();
  std::vector<std::vector<int>> g(n);
  for (int i = 0; i < n; ++i) {
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const int j = a.col_idx[k];
      if (j == i) continue;
      if (std::abs(a.values[k]) >= theta * std::sqrt(std::abs(d[i] * d[j])) && a.values[k] != 0.0) {
        g[i].push_back(j);
        g[j].push_back(i);
      }
    }
  }
  for (auto& row : g) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return g;
}

// Greedy aggregation. Returns aggregate id per node (-1 = isolated) and count.
int aggregate(const std::vector<std::vector<int>>& g, std::vector<int>& agg) {
  const int n = static_cast<int>(g.size());
  agg.assign(n, -1);
  int count = 0;
  // pass 1: seed aggregates whose whole neighborhood is free
  for (int i = 0; i < n; ++i) {
    if (agg[i] >= 0 || g[i].empty()) continue;
    bool free = true;
    for (int j : g[i])
      if (agg[j] >= 0) {
        free = false;
        break;
      }
    if (!free) continue;
    agg[i] = count;
    for (int j : g[i]) agg[j] = count;
    ++count;
  }
  // pass 2: attach leftovers to a neighboring aggregate
  std::vector<int> pass2 = agg;
  for (int i = 0; i < n; ++i) {
    if (agg[i] >= 0 || g[i].empty()) continue;
    for (int j : g[i])
      if (agg[j] >= 0) {
        pass2[i] = agg[j];
        break;
      }
  }
  agg = pass2;
  // pass 3: remaining connected nodes form aggregates with free neighbors
  for (int i = 0; i < n; ++i) {
    if (agg[i] >= 0 || g[i].empty()) continue;
    agg[i] = count;
    for (int j : g[i])
      if (agg[j] < 0) agg[j] = count;
    ++count;
  }
  return count;
}

double spectral_radius_dinv_a(const CsrMatrix& a, const Vector& dinv) {
  const int n = a.rows;
  Vector x(n), y(n);
  for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.37 * std::sin(1.7 * i + 0.3);
  double rho = 1.0;
  for (int it = 0; it < 20; ++it) {
    const double nx = kernels::norm2(x);
    if (nx == 0.0) break;
    for (double& v : x) v /= nx;
    a.multiply(x, y);
    for (int i = 0; i < n; ++i) y[i] *= dinv[i];
    rho = kernels::norm2(y);
    std::swap(x, y);
  }
  return rho;
}

}  // namespace

AmgHierarchy::AmgHierarchy(const CsrMatrix& a, const AmgConfig& cfg) : cfg_(cfg) {
  if (a.rows != a.cols) throw Error("AMG: matrix must be square");
  CsrMatrix cur = a;
  while (true) {
    Level lvl;
    lvl.a = std::move(cur);
    const int n = lvl.a.rows;
    const Vector d = lvl.a.diagonal();
    for (int i = 0; i < n; ++i)
      if (d[i] == 0.0) throw Error("AMG setup: zero diagonal entry in row " + std::to_string(i));
    lvl.inv_l1 = kernels::l1_block_inverse_diagonal(lvl.a, cfg_.smoother_block);
    lvl.res.resize(n);
    lvl.work.resize(n);
    levels_.push_back(std::move(lvl));
    Level& L = levels_.back();
    if (n <= cfg_.coarse_size || static_cast<int>(levels_.size()) >= cfg_.max_levels) break;

    std::vector<int> agg;
    const int nc = aggregate(strength_graph(L.a, cfg_.strength), agg);
    if (nc == 0 || nc >= n) break;

    // tentative prolongation: piecewise constant, columns normalized
    std::vector<int> agg_size(nc, 0);
    for (int v : agg)
      if (v >= 0) ++agg_size[v];
    TripletBuilder tb(n, nc);
    for (int i = 0; i < n; ++i)
      if (agg[i] >= 0) tb.add(i, agg[i], 1.0 / std::sqrt(static_cast<double>(agg_size[agg[i]])));
    const CsrMatrix p_tent = tb.build();

    // smoothed prolongation P = (I - omega D^{-1} A) P_tent
    Vector dinv(n);
    for (int i = 0; i < n; ++i) dinv[i] = 1.0 / d[i];
    const double omega = (4.0 / 3.0) / spectral_radius_dinv_a(L.a, dinv);
    CsrMatrix dinv_a = L.a;
    for (int i = 0; i < n; ++i)
      for (int k = dinv_a.row_ptr[i]; k < dinv_a.row_ptr[i + 1]; ++k) dinv_a.values[k] *= omega * dinv[i];
    CsrMatrix p = add(p_tent, multiply(dinv_a, p_tent), -1.0);
    L.r = p.transpose();
    cur = multiply(L.r, multiply(L.a, p));
    L.p = std::move(p);
    L.bc.resize(nc);
    L.xc.resize(nc);
  }

  coarse_ = std::make_unique<Coarse>();
  const CsrMatrix& ac = levels_.back().a;
  if (ac.rows <= cfg_.max_direct) {
    const auto dense = ac.to_dense();
    Eigen::MatrixXd m(ac.rows, ac.rows);
    for (int i = 0; i < ac.rows; ++i)
      for (int j = 0; j < ac.rows; ++j) m(i, j) = dense[static_cast<std::size_t>(i) * ac.rows + j];
    coarse_->lu.compute(m);
    coarse_->direct = true;
  }
}

AmgHierarchy::~AmgHierarchy() = default;
AmgHierarchy::AmgHierarchy(AmgHierarchy&&) noexcept = default;
AmgHierarchy& AmgHierarchy::operator=(AmgHierarchy&&) noexcept = default;

int AmgHierarchy::num_levels() const { return static_cast<int>(levels_.size()); }
int AmgHierarchy::size() const { return levels_.front().a.rows; }

std::vector<int> AmgHierarchy::level_sizes() const {
  std::vector<int> s;
  for (const auto& l : levels_) s.push_back(l.a.rows);
  return s;
}

void AmgHierarchy::cycle_level(int l, std::span<const double> b, std::span<double> x) const {
  const Level& L = levels_[l];
  const int n = L.a.rows;
  if (l + 1 == num_levels()) {
    if (coarse_->direct) {
      Eigen::Map<const Eigen::VectorXd> bv(b.data(), n);
      Eigen::Map<Eigen::VectorXd> xv(x.data(), n);
      xv = coarse_->lu.solve(bv);
    } else {
      for (int s = 0; s < 20; ++s) kernels::l1_gs_sweep(L.a, L.inv_l1, cfg_.smoother_block, s % 2 == 1, b, x, L.work);
    }
    return;
  }
  for (int s = 0; s < cfg_.pre_sweeps; ++s) kernels::l1_gs_sweep(L.a, L.inv_l1, cfg_.smoother_block, false, b, x, L.work);
  L.a.multiply(x, L.res);
  for (int i = 0; i < n; ++i) L.res[i] = b[i] - L.res[i];
  L.r.multiply(L.res, L.bc);
  std::fill(L.xc.begin(), L.xc.end(), 0.0);
  const int visits = cfg_.cycle == Cycle::W && l + 2 < num_levels() ? 2 : 1;
  for (int v = 0; v < visits; ++v) cycle_level(l + 1, L.bc, L.xc);
  L.p.multiply(L.xc, L.work);
  for (int i = 0; i < n; ++i) x[i] += L.work[i];
  // backward after the coarse correction keeps the cycle symmetric
  for (int s = 0; s < cfg_.post_sweeps; ++s) kernels::l1_gs_sweep(L.a, L.inv_l1, cfg_.smoother_block, true, b, x, L.work);
}

void AmgHierarchy::cycle(std::span<const double> b, std::span<double> x) const { cycle_level(0, b, x); }

void AmgHierarchy::apply(std::span<const double> r, std::span<double> z) const {
  std::fill(z.begin(), z.end(), 0.0);
  for (int it = 0; it < cfg_.iterations; ++it) cycle_level(0, r, z);
}

Vector AmgHierarchy::apply(std::span<const double> r) const {
  Vector z(r.size());
  apply(r, z);
  return z;
}

// ---------------------------------------------------------------- FGMRES

FgmresResult fgmres(const LinearOperator& op, const LinearOperator& precond, std::span<const double> rhs,
                    const FgmresConfig& cfg, std::span<const double> x0) {
  if (cfg.restart < 1) throw Error("FGMRES: restart must be >= 1");
  const int n = static_cast<int>(rhs.size());
  FgmresResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());
  const double bnorm = kernels::norm2(rhs);
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    res.converged = true;
    return res;
  }
  const int m = cfg.restart;
  std::vector<Vector> v(m + 1, Vector(n)), z(m, Vector(n));
  std::vector<double> h(static_cast<std::size_t>(m + 1) * m), cs(m), sn(m), g(m + 1);
  auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i) * m + j]; };
  Vector w(n);

  auto true_residual = [&](Vector& r) {
    op(res.x, r);
    for (int i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    return kernels::norm2(r);
  };

  double beta = true_residual(v[0]);
  res.relative_residual = beta / bnorm;
  if (res.relative_residual <= cfg.tol) {
    res.converged = true;
    return res;
  }
  while (res.iterations < cfg.max_iters) {
    for (double& e : v[0]) e /= beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int j = 0;
    bool happy = false;
    for (; j < m && res.iterations < cfg.max_iters; ++j) {
      if (precond) precond(v[j], z[j]);
      else z[j] = v[j];
      op(z[j], w);
      // modified Gram-Schmidt
      for (int i = 0; i <= j; ++i) {
        H(i, j) = kernels::dot(w, v[i]);
        kernels::axpby(-H(i, j), v[i], 1.0, w);
      }
      const double hn = kernels::norm2(w);
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      if (denom == 0.0) throw SolverError("FGMRES: breakdown (zero Hessenberg column)");
      cs[j] = H(j, j) / denom;
      sn[j] = H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++res.iterations;
      if (!std::isfinite(g[j + 1])) throw SolverError("FGMRES: non-finite residual estimate");
      if (std::abs(g[j + 1]) <= cfg.tol * bnorm || hn <= 1e-14 * denom) {
        happy = hn <= 1e-14 * denom;
        ++j;
        break;
      }
      for (int i = 0; i < n; ++i) v[j + 1][i] = w[i] / hn;
    }
    // x += Z y with H y = g
    std::vector<double> y(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H(i, k) * y[k];
      y[i] = s / H(i, i);
    }
    for (int k = 0; k < j; ++k) kernels::axpby(y[k], z[k], 1.0, res.x);
    beta = true_residual(v[0]);
    res.relative_residual = beta / bnorm;
    if (res.relative_residual <= cfg.tol || (happy && res.relative_residual <= std::max(cfg.tol, 1e-12))) {
      res.converged = true;
      return res;
    }
    if (happy) break;
  }
  res.converged = res.relative_residual <= cfg.tol;
  return res;
}

// ---------------------------------------------------------------- blocks

BlockPreconditioner::BlockPreconditioner(BlockKind kind, LinearOperator amg_bt, LinearOperator amg_b,
                                         LinearOperator a_block, LinearOperator c_block, int n)
    : kind_(kind), amg_bt_(std::move(amg_bt)), amg_b_(std::move(amg_b)), a_(std::move(a_block)),
      c_(std::move(c_block)), n_(n) {}

void BlockPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  const auto r1 = r.subspan(0, n_), r2 = r.subspan(n_, n_);
  auto z1 = z.subspan(0, n_), z2 = z.subspan(n_, n_);
  ++applications_;
  calls_ += 2;
  switch (kind_) {
    case BlockKind::BD:
      amg_bt_(r1, z1);
      amg_b_(r2, z2);
      break;
    case BlockKind::BUT: {
      // z2 = M2 r2, z1 = M1 (r1 - A z2)
      amg_b_(r2, z2);
      Vector t(n_);
      a_(std::span<const double>(z2.data(), n_), t);
      for (int i = 0; i < n_; ++i) t[i] = r1[i] - t[i];
      amg_bt_(t, z1);
      break;
    }
    case BlockKind::BLT: {
      // z1 = M1 r1, z2 = M2 (r2 - C z1)
      amg_bt_(r1, z1);
      Vector t(n_);
      c_(std::span<const double>(z1.data(), n_), t);
      for (int i = 0; i < n_; ++i) t[i] = r2[i] - t[i];
      amg_b_(t, z2);
      break;
    }
  }
}

LinearOperator BlockPreconditioner::as_operator() const {
  return [this](std::span<const double> r, std::span<double> z) { apply(r, z); };
}

}  // namespace fbgs
