#include "fbgs/quadrature.hpp"

#include <cmath>

#include "fbgs/error.hpp"

namespace fbgs::quad {

const TriangleRule& triangle_order2() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.order = 2;
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    r.points = {{a, b, b}, {b, a, b}, {b, b, a}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
  }();
  return rule;
}

const TriangleRule& triangle_order5() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.order = 5;
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
    const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
    const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
    r.points = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                {b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1},
                {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}};
    r.weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

namespace {

LineRule make_gauss(int n) {
  // Newton on the Legendre polynomial, mapped to [0, 1]
  LineRule r;
  r.points.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.points[n - 1 - i] = 0.5 * (x + 1.0);
    r.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

}  // namespace

const LineRule& gauss(int n) {
  static const std::array<LineRule, 6> rules = [] {
    std::array<LineRule, 6> a;
    for (int k = 1; k <= 6; ++k) a[k - 1] = make_gauss(k);
    return a;
  }();
  if (n < 1 || n > 6) throw Error("gauss: supported orders are 1..6");
  return rules[n - 1];
}

}  // namespace fbgs::quad
