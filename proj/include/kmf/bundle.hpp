#pragma once

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "kmf/calculus.hpp"
#include "kmf/surface.hpp"

namespace kmf {

// Line bundle L of degree k over the surface together with the section basis
// of H^0(L + K_X). Sphere: k >= 2, sections are the monomials z^i of
// O(m), m = k-2, with normalizers c_i^2 = (m+1) binom(m,i) making the basis
// orthonormal at u = 0; the weight density for Gram integrals is
// (1+|z|^2)^{-m} e^{-u}. Torus: degree-one bundle L_p with the single section
// weight e^{g_p}, int g_p omega_0 = 0.
struct BundleSetup {
  SurfacePtr surface;
  int degree = 0;        // deg L = V
  int N = 0;             // dim H^0(L + K_X)
  // sphere
  Eigen::MatrixXcd basis;    // node x N, entries c_i z^i
  Eigen::VectorXd rho_m;     // (1+|z|^2)^{-m} at nodes
  // torus
  int marked_point = -1;
  std::shared_ptr<const TorusGreen> green;

  int m() const { return degree - 2; }
  double V() const { return static_cast<double>(degree); }
  bool is_sphere() const { return surface->kind == SurfaceKind::sphere; }

  // e^{-psi} weight of the section measure (without e^{-u}): sphere rho_m,
  // torus e^{g_p}
  Eigen::VectorXd section_weight() const {
    if (is_sphere()) return rho_m;
    return green->exp_values();
  }
};

using BundlePtr = std::shared_ptr<const BundleSetup>;

inline double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
  return r;
}

inline BundlePtr make_sphere_bundle(const SurfacePtr& s, int degree) {
  if (s->kind != SurfaceKind::sphere)
    throw std::invalid_argument("make_sphere_bundle: needs a sphere surface");
  if (degree < 2) throw std::invalid_argument("make_sphere_bundle: degree must be >= 2");
  auto b = std::make_shared<BundleSetup>();
  b->surface = s;
  b->degree = degree;
  const int m = degree - 2;
  b->N = m + 1;
  if (4 * (m + 1) > s->n_phi)
    throw std::invalid_argument("make_sphere_bundle: need n_phi >= 4(m+1) azimuthal nodes");
  b->basis.resize(s->num_nodes(), b->N);
  b->rho_m.resize(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) {
    const std::complex<double> z = s->chart_point(i);
    const double c = s->node_cos_theta(i);
    b->rho_m[i] = std::pow((1.0 + c) / 2.0, m);  // (1+|z|^2)^{-m}
    std::complex<double> zp = 1.0;
    for (int j = 0; j <= m; ++j) {
      b->basis(i, j) = std::sqrt((m + 1) * binom(m, j)) * zp;
      zp *= z;
    }
  }
  return b;
}

inline BundlePtr make_torus_bundle(const SurfacePtr& s, int marked_node) {
  if (s->kind != SurfaceKind::torus)
    throw std::invalid_argument("make_torus_bundle: needs a torus surface");
  auto b = std::make_shared<BundleSetup>();
  b->surface = s;
  b->degree = 1;
  b->N = 1;
  b->marked_point = marked_node;
  b->green = std::make_shared<const TorusGreen>(green_function(s, marked_node));
  return b;
}

}  // namespace kmf
