#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "kmf/surface.hpp"

namespace kmf {

// Moebius map z -> (az+b)/(cz+d) as a 2x2 complex matrix
struct Mobius {
  std::complex<double> a{1.0}, b{0.0}, c{0.0}, d{1.0};

  std::complex<double> det() const { return a * d - b * c; }

  Mobius compose(const Mobius& g) const {  // (*this) after g: z -> this(g(z))
    return {a * g.a + b * g.c, a * g.b + b * g.d, c * g.a + d * g.c, c * g.b + d * g.d};
  }

  std::complex<double> apply(std::complex<double> z) const { return (a * z + b) / (c * z + d); }
};

// v = F*(psi + u) - psi for the degree-k reference weight psi = k psi_0,
// sampled on the grid via spectral evaluation of u at the mapped nodes.
// Stable form: with P = |az+b|^2, Q = |cz+d|^2 the mapped point has
// cos(theta) = (Q-P)/(Q+P), phi = arg((az+b) conj(cz+d)), and the weight
// transport is k (log(P+Q) - log|det F| - psi_0(z)).
inline Potential mobius_pullback(const SurfacePtr& s, const Potential& u, const Mobius& F,
                                 int degree = 1) {
  require_same_surface(s, u.surface);
  if (s->kind != SurfaceKind::sphere)
    throw std::invalid_argument("mobius_pullback: sphere surfaces only");
  const double absdet = std::abs(F.det());
  if (!(absdet > 0.0)) throw std::invalid_argument("mobius_pullback: singular matrix");
  const auto coef = s->sht->analyze(u.values);
  Eigen::VectorXd v(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) {
    const std::complex<double> z = s->chart_point(i);
    const std::complex<double> num = F.a * z + F.b;
    const std::complex<double> den = F.c * z + F.d;
    const double P = std::norm(num), Q = std::norm(den);
    double cw = (Q - P) / (Q + P);
    cw = std::min(1.0, std::max(-1.0, cw));
    const double phiw = std::arg(num * std::conj(den));
    const double u_at_w = s->sht->evaluate(coef, cw, phiw);
    v[i] = u_at_w + degree * (std::log(P + Q) - std::log(absdet) - s->psi0(i));
  }
  return {s, std::move(v)};
}

}  // namespace kmf
