#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kmf/surface.hpp"

namespace kmf {

// dd^c u as a density against omega_0, computed spectrally. On the sphere
// dd^c Y_lm = -l(l+1) Y_lm omega_0; on the torus the multiplier is
// -(pi/Im tau)|jb - ja tau|^2 per Fourier mode.
inline Density ddc(const SurfacePtr& s, const Potential& u) {
  require_same_surface(s, u.surface);
  if (s->kind == SurfaceKind::sphere) {
    auto coef = s->sht->analyze(u.values);
    std::vector<double> g(s->sht->lmax() + 1);
    for (int l = 0; l <= s->sht->lmax(); ++l) g[l] = -static_cast<double>(l) * (l + 1);
    return {s, s->sht->synthesize(s->sht->scale_by_l(coef, g))};
  }
  auto coef = s->fft->analyze(u.values);
  s->fft->for_each_mode([&](int idx, int ja, int jb) { coef[idx] *= s->fft->ddc_multiplier(ja, jb); });
  return {s, s->fft->synthesize(coef)};
}

// solve dd^c v = rho (mean-zero density) with int v omega_0 = 0
inline Potential inv_ddc(const SurfacePtr& s, const Eigen::VectorXd& rho) {
  if (rho.size() != s->num_nodes()) throw std::invalid_argument("inv_ddc: size mismatch");
  if (s->kind == SurfaceKind::sphere) {
    auto coef = s->sht->analyze(rho);
    std::vector<double> g(s->sht->lmax() + 1, 0.0);
    for (int l = 1; l <= s->sht->lmax(); ++l) g[l] = -1.0 / (static_cast<double>(l) * (l + 1));
    return {s, s->sht->synthesize(s->sht->scale_by_l(coef, g))};
  }
  auto coef = s->fft->analyze(rho);
  s->fft->for_each_mode([&](int idx, int ja, int jb) {
    if (ja == 0 && jb == 0)
      coef[idx] = 0.0;
    else
      coef[idx] /= s->fft->ddc_multiplier(ja, jb);
  });
  return {s, s->fft->synthesize(coef)};
}

// int du ^ d^c v, the symmetric Dirichlet pairing; equals -int u dd^c v
inline double dirichlet(const SurfacePtr& s, const Potential& u, const Potential& v) {
  require_same_surface(s, u.surface);
  require_same_surface(s, v.surface);
  const Density dv = ddc(s, v);
  return -s->quad.dot(u.values.cwiseProduct(dv.values));
}

// --- chart derivatives -----------------------------------------------------
//
// First complex derivatives of a real scalar on the grid, as chart
// coefficients: d_zbar f at each node. Sphere: computed in the chart
// z = r e^{i phi}, r^2 = (1-c)/(1+c) (smooth through the north pole region);
// values near the south pole are still exact in exact arithmetic but the
// gradient-squared density below is the chart-invariant quantity to consume.
inline Eigen::VectorXcd dzbar(const SurfacePtr& s, const Potential& u) {
  require_same_surface(s, u.surface);
  const int nn = s->num_nodes();
  Eigen::VectorXcd out(nn);
  if (s->kind == SurfaceKind::sphere) {
    auto coef = s->sht->analyze(u.values);
    Eigen::VectorXd fc = s->sht->deriv_c(coef);
    Eigen::VectorXd fphi = s->sht->deriv_phi(coef);
    for (int i = 0; i < nn; ++i) {
      const double c = s->node_cos_theta(i), phi = s->node_phi(i);
      const double r = std::sqrt((1.0 - c) / (1.0 + c));
      const double A = -r * (1.0 + c) * (1.0 + c);  // dc/dr
      const std::complex<double> e = std::polar(1.0, phi);
      out[i] = 0.5 * e * (A * fc[i] + std::complex<double>(0.0, 1.0 / r) * fphi[i]);
    }
    return out;
  }
  auto coef = s->fft->analyze(u.values);
  Eigen::VectorXcd da(nn), db(nn);
  auto ca = coef, cb = coef;
  s->fft->for_each_mode([&](int idx, int ja, int jb) {
    ca[idx] *= std::complex<double>(0.0, 2.0 * M_PI * ja);
    cb[idx] *= std::complex<double>(0.0, 2.0 * M_PI * jb);
  });
  da = s->fft->synthesize_complex(ca);
  db = s->fft->synthesize_complex(cb);
  const std::complex<double> den(0.0, 2.0 * s->tau.imag());
  for (int i = 0; i < nn; ++i) out[i] = (s->tau * da[i] - db[i]) / den;
  return out;
}

// First and second antiholomorphic chart derivatives of a real scalar on the
// sphere, assembled from exact spectral (c, phi) partials. The chart is z for
// south = false and zeta = 1/z for south = true; with e = e^{i phi'},
// A = -r'(1+c')^2 the operator is dbar = (e/2)(A d_c' + (i/r') d_phi') and
// dbar of e brings the extra -e^2/(2r') term in the second derivative.
struct SphereScalarDerivs {
  Eigen::VectorXd fc, fcc, fphi, fphiphi, fcphi;

  static SphereScalarDerivs build(const SurfacePtr& s, const Eigen::VectorXd& f) {
    SphereScalarDerivs d;
    const auto coef = s->sht->analyze(f);
    d.fc = s->sht->deriv_c(coef);
    d.fcc = s->sht->deriv_cc(coef);
    d.fphi = s->sht->deriv_phi(coef);
    Eigen::VectorXcd m1(coef.size()), m2(coef.size());
    for (int m = 0; m <= s->sht->mmax(); ++m)
      for (int l = m; l <= s->sht->lmax(); ++l) {
        const auto idx = s->sht->coeff_index(l, m);
        m1[idx] = std::complex<double>(0.0, m) * coef[idx];
        m2[idx] = -static_cast<double>(m) * m * coef[idx];
      }
    d.fcphi = s->sht->deriv_c(m1);
    d.fphiphi = s->sht->synthesize(m2);
    return d;
  }
};

struct ChartDbarPair {
  std::complex<double> dbar;
  std::complex<double> dbar2;
};

inline ChartDbarPair sphere_chart_dbar(const SurfacePtr& s, const SphereScalarDerivs& d, int i,
                                       bool south) {
  const double c = s->node_cos_theta(i), phi = s->node_phi(i);
  const double ce = south ? -c : c;
  const std::complex<double> e = std::polar(1.0, south ? -phi : phi);
  const double f1c = south ? -d.fc[i] : d.fc[i];
  const double f1p = south ? -d.fphi[i] : d.fphi[i];
  const double r = std::sqrt((1.0 - ce) / (1.0 + ce));
  const double A = -r * (1.0 + ce) * (1.0 + ce);
  const double Ap = 1.0 / r - 2.0 * r * (1.0 + ce);
  const double rp = 1.0 / A;  // dr/dc in the chart variable
  const std::complex<double> I(0.0, 1.0);
  const std::complex<double> G = A * f1c + I / r * f1p;
  const std::complex<double> Gc =
      Ap * f1c + A * d.fcc[i] - I * rp / (r * r) * f1p + I / r * d.fcphi[i];
  const std::complex<double> Gp = A * d.fcphi[i] + I / r * d.fphiphi[i];
  ChartDbarPair out;
  out.dbar = 0.5 * e * G;
  out.dbar2 = 0.5 * e * e * (-G / (2.0 * r) + 0.5 * (A * Gc + I / r * Gp));
  return out;
}

// chart coefficient h of omega_0 = (i/2pi) h dz ^ dzbar at a node
inline double omega0_chart_coeff(const SurfacePtr& s, int idx) {
  if (s->kind == SurfaceKind::sphere) {
    const double c = s->node_cos_theta(idx);
    const double opz2 = 2.0 / (1.0 + c);  // 1+|z|^2
    return 1.0 / (opz2 * opz2);
  }
  return M_PI / s->tau.imag();
}

// |d_z u|^2 / h: the chart-invariant Dirichlet energy density, with
// dirichlet(u,u) = int of it against omega_0
inline Eigen::VectorXd grad_density(const SurfacePtr& s, const Potential& u) {
  Eigen::VectorXcd d = dzbar(s, u);
  Eigen::VectorXd out(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) out[i] = std::norm(d[i]) / omega0_chart_coeff(s, i);
  return out;
}

// --- torus Green function --------------------------------------------------
//
// g_p with dd^c g_p = delta_p - omega_0 and int g_p omega_0 = 0. Ewald-type
// split: g = w + h with w(z) = -sum_lambda E1(|z - p - lambda|^2 / sigma^2)
// carrying the log singularity (w ~ log|z-p|^2 + gamma - log sigma^2 near p)
// and h smooth, solved in Fourier space against the periodized Gaussian.
struct TorusGreen {
  SurfacePtr surface;
  int pole = 0;
  double sigma = 0.0;
  Potential smooth;          // h on the grid
  Eigen::VectorXcd h_hat;    // Fourier coefficients of h
  Eigen::VectorXd gaussian;  // periodized Gaussian density (against dxdy)

  std::complex<double> pole_point() const { return surface->chart_point(pole); }

  // w(z): image sum of -E1; -inf at the pole itself
  double near_part(std::complex<double> z) const {
    const std::complex<double> p = pole_point();
    const double s2 = sigma * sigma;
    double acc = 0.0;
    for (int la = -2; la <= 2; ++la)
      for (int lb = -2; lb <= 2; ++lb) {
        const std::complex<double> d = z - p - std::complex<double>(la, 0.0) -
                                       surface->tau * static_cast<double>(lb);
        const double r2 = std::norm(d);
        if (r2 == 0.0) return -std::numeric_limits<double>::infinity();
        const double x = r2 / s2;
        if (x < 700.0) acc -= -std::expint(-x);  // E1(x) = -Ei(-x)
      }
    return acc;
  }

  // g_p at a node (-inf at the pole node)
  double value(int idx) const {
    if (idx == pole) return -std::numeric_limits<double>::infinity();
    return near_part(surface->chart_point(idx)) + smooth.values[idx];
  }

  // g_p - log|z-p|^2 near the pole (nearest-image log subtracted); finite
  double regularized(int idx) const {
    const std::complex<double> z = surface->chart_point(idx);
    const std::complex<double> p = pole_point();
    if (idx == pole) {
      const double egamma = 0.57721566490153286;
      return egamma - std::log(sigma * sigma) + tail_terms(z, p) + smooth.values[idx];
    }
    double r2 = nearest_image_dist2(z, p);
    return near_part(z) - std::log(r2) + smooth.values[idx];
  }

  // e^{g_p} at a node, exactly 0 at the pole
  double exp_value(int idx) const {
    if (idx == pole) return 0.0;
    return std::exp(value(idx));
  }

  Eigen::VectorXd exp_values() const {
    Eigen::VectorXd out(surface->num_nodes());
    for (int i = 0; i < surface->num_nodes(); ++i) out[i] = exp_value(i);
    return out;
  }

  // exact pairing int g_p dd^c phi computed through the splitting:
  // phi(p) - Im(tau) * int phi G_sigma omega_0 + sum_m h_hat conj(ddc phi)_m
  double pair_ddc(const Potential& phi) const {
    require_same_surface(surface, phi.surface);
    const auto& fft = *surface->fft;
    auto phat = fft.analyze(phi.values);
    std::complex<double> acc = 0.0;
    fft.for_each_mode([&](int idx, int ja, int jb) {
      acc += h_hat[idx] * std::conj(phat[idx]) * fft.ddc_multiplier(ja, jb);
    });
    const double t2 = surface->tau.imag();
    const double phi_at_p = phi.values[pole];
    const double gauss_term = t2 * surface->quad.dot(phi.values.cwiseProduct(gaussian));
    return phi_at_p - gauss_term + acc.real();
  }

 private:
  double nearest_image_dist2(std::complex<double> z, std::complex<double> p) const {
    double best = std::numeric_limits<double>::infinity();
    for (int la = -1; la <= 1; ++la)
      for (int lb = -1; lb <= 1; ++lb) {
        const std::complex<double> d =
            z - p - std::complex<double>(la, 0.0) - surface->tau * static_cast<double>(lb);
        best = std::min(best, std::norm(d));
      }
    return best;
  }

  double tail_terms(std::complex<double> z, std::complex<double> p) const {
    const double s2 = sigma * sigma;
    double acc = 0.0;
    for (int la = -2; la <= 2; ++la)
      for (int lb = -2; lb <= 2; ++lb) {
        if (la == 0 && lb == 0) continue;
        const std::complex<double> d =
            z - p - std::complex<double>(la, 0.0) - surface->tau * static_cast<double>(lb);
        const double x = std::norm(d) / s2;
        if (x < 700.0) acc -= -std::expint(-x);
      }
    return acc;
  }
};

inline TorusGreen green_function(const SurfacePtr& s, int pole_idx) {
  if (s->kind != SurfaceKind::torus)
    throw std::invalid_argument("green_function: torus surfaces only");
  if (pole_idx < 0 || pole_idx >= s->num_nodes())
    throw std::invalid_argument("green_function: pole must be a node");
  TorusGreen g;
  g.surface = s;
  g.pole = pole_idx;
  const auto& fft = *s->fft;
  const double t2 = s->tau.imag();
  // sigma resolves both the grid (frequency tail) and the image sum
  const double cell = std::max(1.0, std::abs(s->tau)) / s->n;
  g.sigma = 4.2 * cell;
  const double s2 = g.sigma * g.sigma;

  // periodized Gaussian density (against dxdy) at the nodes
  const std::complex<double> p = s->chart_point(pole_idx);
  g.gaussian.resize(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) {
    const std::complex<double> z = s->chart_point(i);
    double acc = 0.0;
    for (int la = -2; la <= 2; ++la)
      for (int lb = -2; lb <= 2; ++lb) {
        const std::complex<double> d =
            z - p - std::complex<double>(la, 0.0) - s->tau * static_cast<double>(lb);
        acc += std::exp(-std::norm(d) / s2);
      }
    g.gaussian[i] = acc / (M_PI * s2);
  }

  // Delta_eucl h = 4 pi (G_sigma - 1/Im tau); solve in Fourier space.
  // Fourier multiplier of Delta_eucl is -(4 pi^2 / t2^2)|jb - ja tau|^2.
  auto ghat = fft.analyze(g.gaussian);
  g.h_hat.resize(s->num_nodes());
  fft.for_each_mode([&](int idx, int ja, int jb) {
    if (ja == 0 && jb == 0) {
      g.h_hat[idx] = 0.0;
    } else {
      const double lap = -(4.0 * M_PI * M_PI / (t2 * t2)) * fft.lattice_norm2(ja, jb);
      g.h_hat[idx] = 4.0 * M_PI * ghat[idx] / lap;
    }
  });
  // gauge int g omega_0 = 0: int w omega_0 = -pi sigma^2 / Im tau exactly
  g.h_hat[0] = M_PI * s2 / t2;
  g.smooth = Potential{s, fft.synthesize(g.h_hat)};
  return g;
}

}  // namespace kmf
