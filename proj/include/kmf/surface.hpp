#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmf/gauss_legendre.hpp"
#include "kmf/sht.hpp"
#include "kmf/torus_fft.hpp"

namespace kmf {

enum class SurfaceKind { sphere, torus };

// Discretized curve carrying unit-total quadrature for the reference form
// omega_0. Sphere: Gauss-Legendre nodes in cos(theta) x uniform azimuthal
// nodes (node idx = it*n_phi + ip, chart z from stereographic projection with
// z = 0 at cos(theta) = 1). Torus: n x n uniform lattice in the coordinates
// (a,b) of z = a + tau*b (node idx = ib*n + ia). Immutable after
// construction; all densities are stored relative to this quadrature.
class Surface {
 public:
  SurfaceKind kind;

  // sphere data
  int n_theta = 0, n_phi = 0;
  std::vector<double> cos_theta;    // ascending GL nodes
  std::vector<double> ring_weight;  // sums to 1
  std::shared_ptr<const SphereTransform> sht;

  // torus data
  int n = 0;
  std::complex<double> tau{0.0, 0.0};
  std::shared_ptr<const TorusTransform> fft;

  Eigen::VectorXd quad;  // per-node weights, sum 1

  int num_nodes() const { return static_cast<int>(quad.size()); }

  // chart coordinate of a node: sphere z = r e^{i phi}, torus z = a + tau b
  std::complex<double> chart_point(int idx) const {
    if (kind == SurfaceKind::sphere) {
      const int it = idx / n_phi, ip = idx % n_phi;
      const double c = cos_theta[it];
      const double r = std::sqrt((1.0 - c) / (1.0 + c));
      const double phi = 2.0 * M_PI * ip / n_phi;
      return std::polar(r, phi);
    }
    const int ib = idx / n, ia = idx % n;
    return std::complex<double>(static_cast<double>(ia) / n, 0.0) +
           tau * (static_cast<double>(ib) / n);
  }

  double node_cos_theta(int idx) const { return cos_theta[idx / n_phi]; }
  double node_phi(int idx) const { return 2.0 * M_PI * (idx % n_phi) / n_phi; }

  // sphere reference weight psi_0(z) = log(1+|z|^2) = log(2/(1+c))
  double psi0(int idx) const {
    if (kind != SurfaceKind::sphere) throw std::logic_error("psi0: sphere only");
    return std::log(2.0 / (1.0 + node_cos_theta(idx)));
  }

  // embedding into R^3 (unit sphere)
  Eigen::Vector3d embed(int idx) const {
    if (kind != SurfaceKind::sphere) throw std::logic_error("embed: sphere only");
    const double c = node_cos_theta(idx), phi = node_phi(idx);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {s * std::cos(phi), s * std::sin(phi), c};
  }

  std::string describe() const {
    if (kind == SurfaceKind::sphere)
      return "sphere " + std::to_string(n_theta) + "x" + std::to_string(n_phi);
    return "torus n=" + std::to_string(n) + " tau=(" + std::to_string(tau.real()) + "," +
           std::to_string(tau.imag()) + ")";
  }
};

using SurfacePtr = std::shared_ptr<const Surface>;

inline SurfacePtr build_sphere(int n_theta, int n_phi) {
  if (n_theta < 8 || n_phi < 8)
    throw std::invalid_argument("build_sphere: grid sizes must be at least 8");
  auto s = std::make_shared<Surface>();
  s->kind = SurfaceKind::sphere;
  s->n_theta = n_theta;
  s->n_phi = n_phi;
  std::vector<double> w;
  gauss_legendre(n_theta, s->cos_theta, w);
  double total = 0.0;
  for (double wi : w) total += wi;
  s->ring_weight.resize(n_theta);
  for (int i = 0; i < n_theta; ++i) s->ring_weight[i] = w[i] / total;
  s->quad.resize(static_cast<Eigen::Index>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i)
    for (int j = 0; j < n_phi; ++j) s->quad[i * n_phi + j] = s->ring_weight[i] / n_phi;
  s->sht = std::make_shared<const SphereTransform>(s->cos_theta, s->ring_weight, n_phi);
  return s;
}

inline SurfacePtr build_torus(std::complex<double> tau, int n) {
  if (tau.imag() <= 0.0) throw std::invalid_argument("build_torus: Im tau must be positive");
  if (n < 16 || n % 2 != 0) throw std::invalid_argument("build_torus: n must be even and >= 16");
  auto s = std::make_shared<Surface>();
  s->kind = SurfaceKind::torus;
  s->n = n;
  s->tau = tau;
  s->quad = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n) * n,
                                      1.0 / (static_cast<double>(n) * n));
  s->fft = std::make_shared<const TorusTransform>(n, tau);
  return s;
}

// Real function on the surface, metric potential e^{-u} h_0.
struct Potential {
  SurfacePtr surface;
  Eigen::VectorXd values;

  Potential() = default;
  Potential(SurfacePtr s, Eigen::VectorXd v) : surface(std::move(s)), values(std::move(v)) {
    if (values.size() != surface->num_nodes())
      throw std::invalid_argument("Potential: value count does not match surface");
  }
  explicit Potential(SurfacePtr s) : surface(std::move(s)) {
    values = Eigen::VectorXd::Zero(surface->num_nodes());
  }
};

// Signed measure stored as a density against the surface quadrature.
struct Density {
  SurfacePtr surface;
  Eigen::VectorXd values;
  double total_mass = 0.0;

  Density() = default;
  Density(SurfacePtr s, Eigen::VectorXd v) : surface(std::move(s)), values(std::move(v)) {
    if (values.size() != surface->num_nodes())
      throw std::invalid_argument("Density: value count does not match surface");
    total_mass = surface->quad.dot(values);
  }
};

inline void require_same_surface(const SurfacePtr& a, const SurfacePtr& b) {
  if (a.get() != b.get()) throw std::invalid_argument("mismatched surface handles");
}

inline double integrate(const SurfacePtr& s, const Potential& f) {
  require_same_surface(s, f.surface);
  return s->quad.dot(f.values);
}

inline double integrate(const SurfacePtr& s, const Density& f) {
  require_same_surface(s, f.surface);
  return s->quad.dot(f.values);
}

inline double integrate(const SurfacePtr& s, const Eigen::VectorXd& nodal) {
  if (nodal.size() != s->num_nodes()) throw std::invalid_argument("integrate: size mismatch");
  return s->quad.dot(nodal);
}

inline Potential constant_potential(const SurfacePtr& s, double c) {
  return {s, Eigen::VectorXd::Constant(s->num_nodes(), c)};
}

}  // namespace kmf
