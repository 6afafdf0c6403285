#pragma once

#include <string>
#include <variant>
#include <vector>

namespace fbgs {

/// Natural cubic interpolating spline on strictly increasing knots.
class NaturalSpline {
 public:
  NaturalSpline() = default;
  NaturalSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  int interval(double x) const;

  std::vector<double> x_, y_, m_;  // m_ = second derivatives at knots
};

/// Flux normalization data shared by profile evaluations.
struct FluxBounds {
  double psi_ma = 0.0;
  double psi_x = 1.0;
};

/// (psi - psi_ma)/(psi_x - psi_ma); throws TopologyError if psi_x == psi_ma.
double psi_N(double psi, const FluxBounds& b);

struct LuxonBrown {
  double r0 = 6.2;
  double delta = 2.0;
  double beta = 0.5978;
  double gamma = 1.395;
};

struct TaylorState {
  double fx = 0.0;
};

/// Tabulated profiles. S_f is stored normalized, S_f(0) = 1 and S_f(1) = 0.
struct SplineTable {
  NaturalSpline sp;  // p' as a function of psi_N
  NaturalSpline sf;
  double fx = 0.0;
};

/// Reads two-column (psi_N, value) text; '#' starts a comment.
std::vector<std::pair<double, double>> read_table(const std::string& path);
/// Builds the table model; knots must start at 0 and end at 1.
SplineTable make_spline_table(const std::vector<std::pair<double, double>>& pprime,
                              const std::vector<std::pair<double, double>>& f, double fx);

/// A value and its partial derivatives with respect to the local flux, the
/// axis flux, the x-point flux, and the scaling alpha. A directional
/// semiderivative is d_psi * phi + d_ma * phi_ma + d_x * phi_x.
struct Partials {
  double value = 0.0;
  double d_psi = 0.0;
  double d_ma = 0.0;
  double d_x = 0.0;
  double d_alpha = 0.0;

  double directional(double phi, double phi_ma, double phi_x) const {
    return d_psi * phi + d_ma * phi_ma + d_x * phi_x;
  }
};

struct ProfileEval {
  Partials pprime;
  Partials ffprime;
};

struct ProfileValue {
  double pprime = 0.0;
  double ffprime = 0.0;
};

class ProfileModel {
 public:
  using Variant = std::variant<LuxonBrown, TaylorState, SplineTable>;

  ProfileModel(Variant v, double mu);

  /// p' and ff' at flux psi.
  ProfileValue eval(double psi, const FluxBounds& b, double alpha) const;
  /// Values and partial derivatives.
  ProfileEval partials(double psi, const FluxBounds& b, double alpha) const;
  /// Toroidal field function f(psi) inside the plasma (Taylor and spline
  /// models); f_x for the Luxon-Brown model, which has no explicit f.
  double f(double psi, const FluxBounds& b, double alpha) const;
  double fx() const;

  const Variant& variant() const { return v_; }
  std::string name() const;
  double mu() const { return mu_; }

 private:
  Variant v_;
  double mu_;
};

}  // namespace fbgs
