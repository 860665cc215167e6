#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kmf {

// Gauss-Legendre nodes and weights on [-1,1], nodes ascending.
// Newton iteration on P_n with the usual asymptotic initial guess; exact for
// polynomials up to degree 2n-1.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // root of P_n near cos(pi*(i+3/4)/(n+1/2)), refined by Newton
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int l = 0; l < n; ++l) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * l + 1.0) * x * p1 - l * p2) / (l + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

}  // namespace kmf
