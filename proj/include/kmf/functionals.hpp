#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "kmf/bergman.hpp"
#include "kmf/bundle.hpp"
#include "kmf/calculus.hpp"

namespace kmf {

// E(u) = (1/2V) int u (omega_u + V omega_0) with reference V*omega_0 in
// c_1(L); in this normalization E(u+c) = E(u)+c and dE = omega_u/V.
inline double energy_E(const BundlePtr& b, const Potential& u) {
  const Density d = ddc(b->surface, u);
  const auto& W = b->surface->quad;
  return W.dot(u.values) + W.dot(u.values.cwiseProduct(d.values)) / (2.0 * b->V());
}

struct AubinJI {
  double J = 0.0;
  double I = 0.0;
};

// J = (1/2) int du ^ d^c u (reference-free in n = 1); I = int u (omega_0^ref
// - omega_u) = -int u dd^c u, so I = 2J identically in n = 1.
inline AubinJI aubin_JI(const BundlePtr& b, const Potential& u) {
  const Density d = ddc(b->surface, u);
  const double I = -b->surface->quad.dot(u.values.cwiseProduct(d.values));
  const double J = 0.5 * dirichlet(b->surface, u, u);
  return {J, I};
}

// L(u) = -(1/N) log det <s_i, s_j>_{psi_0+u} in the basis orthonormal at
// psi_0 (so L(0) = 0 on the sphere); on the torus this is -log int
// e^{g_p-u} omega_0.
inline double functional_L(const BundlePtr& b, const Potential& u) {
  const GramState st = gram(b, u);
  return -st.logdet / b->N;
}

inline double functional_L(const GramState& st) { return -st.logdet / st.setup->N; }

struct FVariant {
  enum class Kind { plain, delta, q } kind = Kind::plain;
  double value = 0.0;  // delta >= 0 or q in (0,1]

  static FVariant plain() { return {}; }
  static FVariant with_delta(double d) { return {Kind::delta, d}; }
  static FVariant with_q(double q) { return {Kind::q, q}; }
};

// F = E - L and its torus deformations F^delta = F - delta J and
// F_q = E + (1/q) log int e^{q(g_p - u)} omega_0
inline double functional_F(const BundlePtr& b, const Potential& u,
                           const FVariant& variant = FVariant::plain()) {
  switch (variant.kind) {
    case FVariant::Kind::plain:
      return energy_E(b, u) - functional_L(b, u);
    case FVariant::Kind::delta: {
      if (b->is_sphere()) throw std::invalid_argument("delta-deformed F: torus setups only");
      if (variant.value < 0.0) throw std::invalid_argument("delta must be >= 0");
      return functional_F(b, u) - variant.value * aubin_JI(b, u).J;
    }
    case FVariant::Kind::q: {
      if (b->is_sphere()) throw std::invalid_argument("q-deformed F: torus setups only");
      const double q = variant.value;
      if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
      const auto& W = b->surface->quad;
      double z = 0.0;
      for (int i = 0; i < b->surface->num_nodes(); ++i) {
        const double g = b->green->value(i);
        const double e = (i == b->marked_point)
                             ? 0.0
                             : std::exp(q * (g - u.values[i]));
        z += W[i] * e;
      }
      return energy_E(b, u) + std::log(z) / q;
    }
  }
  throw std::logic_error("functional_F: unreachable");
}

// relative entropy S = (1/2V) int log(omega_u / omega_0) omega_u of the
// normalized volume forms; zero iff omega_u = omega_0^ref
inline double entropy_S(const BundlePtr& b, const Potential& u) {
  const Density d = ddc(b->surface, u);
  const auto& W = b->surface->quad;
  double acc = 0.0;
  for (int i = 0; i < b->surface->num_nodes(); ++i) {
    const double mu = 1.0 + d.values[i] / b->V();  // probability density of omega_u
    if (!(mu > 0.0))
      throw std::runtime_error("entropy_S: omega_u nonpositive at node " + std::to_string(i));
    acc += W[i] * mu * std::log(mu);
  }
  return 0.5 * acc;
}

// B(X, omega_u) = sup_X beta_u / (omega_u/V); >= 1 since both sides are
// probability measures
inline double bergman_ratio(const BundlePtr& b, const Potential& u) {
  const Density beta = bergman_measure(gram(b, u));
  const Density d = ddc(b->surface, u);
  double best = 0.0;
  for (int i = 0; i < b->surface->num_nodes(); ++i) {
    const double mu = 1.0 + d.values[i] / b->V();
    if (!(mu > 0.0))
      throw std::runtime_error("bergman_ratio: omega_u degenerate at node " + std::to_string(i));
    best = std::max(best, beta.values[i] / mu);
  }
  return best;
}

}  // namespace kmf
