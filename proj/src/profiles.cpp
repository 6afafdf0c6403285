#include "fbgs/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fbgs/error.hpp"

namespace fbgs {

NaturalSpline::NaturalSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  if (n < 2 || y_.size() != x_.size()) throw Error("spline: need at least two knots with matching values");
  for (int i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw Error("spline: knots must be strictly increasing");
  m_.assign(n, 0.0);
  if (n == 2) return;
  // tridiagonal system for interior second derivatives (Thomas algorithm)
  std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  for (int i = 1; i < n - 1; ++i) {
    const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (int i = 2; i < n - 1; ++i) {
    const double lower = x_[i] - x_[i - 1];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (int i = n - 2; i >= 1; --i) m_[i] = (rhs[i] - (i + 1 < n - 1 ? upper[i] * m_[i + 1] : 0.0)) / diag[i];
}

int NaturalSpline::interval(double x) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  int i = static_cast<int>(it - x_.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(x_.size()) - 2);
}

double NaturalSpline::operator()(double x) const {
  const int i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double NaturalSpline::derivative(double x) const {
  const int i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

double NaturalSpline::second_derivative(double x) const {
  const int i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return a * m_[i] + b * m_[i + 1];
}

double psi_N(double psi, const FluxBounds& b) {
  const double d = b.psi_x - b.psi_ma;
  if (d == 0.0) throw TopologyError("degenerate topology: psi_x equals psi_ma");
  return (psi - b.psi_ma) / d;
}

std::vector<std::pair<double, double>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open table " + path);
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a)) continue;
    if (!(ss >> b)) throw ParseError("expected two columns in " + path, line_no);
    rows.push_back({a, b});
  }
  if (rows.empty()) throw Error("table " + path + " is empty");
  return rows;
}

SplineTable make_spline_table(const std::vector<std::pair<double, double>>& pprime,
                              const std::vector<std::pair<double, double>>& f, double fx) {
  auto split = [](const std::vector<std::pair<double, double>>& rows, std::vector<double>& x, std::vector<double>& y) {
    for (const auto& [a, b] : rows) {
      x.push_back(a);
      y.push_back(b);
    }
    if (x.front() != 0.0 || x.back() != 1.0) throw Error("spline table knots must span [0, 1]");
  };
  std::vector<double> xp, yp, xf, yf;
  split(pprime, xp, yp);
  split(f, xf, yf);
  // shift and scale so that S_f(0) = 1 and S_f(1) = 0 exactly; the natural
  // spline is linear in the data so normalizing values is the same as
  // normalizing the fitted spline
  const double f0 = yf.front(), f1 = yf.back();
  if (f0 == f1) throw Error("spline table: S_f(0) equals S_f(1)");
  for (double& v : yf) v = (v - f1) / (f0 - f1);
  yf.front() = 1.0;
  yf.back() = 0.0;
  return {NaturalSpline(xp, yp), NaturalSpline(xf, yf), fx};
}

ProfileModel::ProfileModel(Variant v, double mu) : v_(std::move(v)), mu_(mu) {
  if (const auto* lb = std::get_if<LuxonBrown>(&v_)) {
    if (!(lb->r0 > 0 && lb->delta > 0 && lb->beta > 0 && lb->gamma > 0))
      throw Error("Luxon-Brown constants must be positive");
  }
}

std::string ProfileModel::name() const {
  switch (v_.index()) {
    case 0: return "luxon_brown";
    case 1: return "taylor";
    default: return "spline";
  }
}

double ProfileModel::fx() const {
  if (const auto* t = std::get_if<TaylorState>(&v_)) return t->fx;
  if (const auto* s = std::get_if<SplineTable>(&v_)) return s->fx;
  return 0.0;
}

ProfileValue ProfileModel::eval(double psi, const FluxBounds& b, double alpha) const {
  const ProfileEval e = partials(psi, b, alpha);
  return {e.pprime.value, e.ffprime.value};
}

double ProfileModel::f(double psi, const FluxBounds& b, double alpha) const {
  if (const auto* t = std::get_if<TaylorState>(&v_)) return t->fx + alpha * (psi - b.psi_x);
  if (const auto* s = std::get_if<SplineTable>(&v_)) {
    const double xn = std::clamp(psi_N(psi, b), 0.0, 1.0);
    return s->fx + alpha * s->sf(xn);
  }
  return 0.0;
}

namespace {

// Chain rule through psi_N: for g(psi_N), fills d_psi, d_ma, d_x from dg/dpsi_N.
void chain_psi_N(Partials& p, double dg, double xn, double span) {
  p.d_psi = dg / span;
  p.d_ma = -dg * (1.0 - xn) / span;
  p.d_x = -dg * xn / span;
}

}  // namespace

ProfileEval ProfileModel::partials(double psi, const FluxBounds& b, double alpha) const {
  ProfileEval out;
  const double span = b.psi_x - b.psi_ma;
  if (span == 0.0) throw TopologyError("degenerate topology: psi_x equals psi_ma");

  if (const auto* lb = std::get_if<LuxonBrown>(&v_)) {
    const double xn = std::clamp((psi - b.psi_ma) / span, 0.0, 1.0);
    const double base = 1.0 - std::pow(xn, lb->delta);
    const double shape = std::pow(base, lb->gamma);
    // d/dpsi_N (1 - psi_N^delta)^gamma
    const double dshape = (xn > 0.0 && xn < 1.0)
                              ? -lb->gamma * lb->delta * std::pow(xn, lb->delta - 1.0) * std::pow(base, lb->gamma - 1.0)
                              : 0.0;
    const double cp = lb->beta / lb->r0;
    const double cf = (1.0 - lb->beta) * mu_ * lb->r0;
    out.pprime.value = alpha * cp * shape;
    out.pprime.d_alpha = cp * shape;
    chain_psi_N(out.pprime, alpha * cp * dshape, xn, span);
    out.ffprime.value = alpha * cf * shape;
    out.ffprime.d_alpha = cf * shape;
    chain_psi_N(out.ffprime, alpha * cf * dshape, xn, span);
    return out;
  }

  if (const auto* t = std::get_if<TaylorState>(&v_)) {
    out.ffprime.value = alpha * (t->fx + alpha * (psi - b.psi_x));
    out.ffprime.d_psi = alpha * alpha;
    out.ffprime.d_x = -alpha * alpha;
    out.ffprime.d_alpha = t->fx + 2.0 * alpha * (psi - b.psi_x);
    return out;
  }

  const auto& s = std::get<SplineTable>(v_);
  const double xn_raw = (psi - b.psi_ma) / span;
  const double xn = std::clamp(xn_raw, 0.0, 1.0);
  // p' = S_p'(psi_N), independent of alpha
  out.pprime.value = s.sp(xn);
  chain_psi_N(out.pprime, s.sp.derivative(xn), xn, span);

  // ff' = Q(psi_N) / (psi_ma - psi_x), Q = alpha (f_x + alpha S_f) S_f'
  const double sf = s.sf(xn), dsf = s.sf.derivative(xn), d2sf = s.sf.second_derivative(xn);
  const double denom = -span;
  const double q = alpha * (s.fx + alpha * sf) * dsf;
  const double dq = alpha * (alpha * dsf * dsf + (s.fx + alpha * sf) * d2sf);
  out.ffprime.value = q / denom;
  chain_psi_N(out.ffprime, dq / denom, xn, span);
  out.ffprime.d_ma -= q / (denom * denom);
  out.ffprime.d_x += q / (denom * denom);
  out.ffprime.d_alpha = (s.fx + 2.0 * alpha * sf) * dsf / denom;
  return out;
}

}  // namespace fbgs
