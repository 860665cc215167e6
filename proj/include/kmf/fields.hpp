#pragma once

#include <cmath>
#include <complex>

#include "kmf/calculus.hpp"
#include "kmf/rng.hpp"
#include "kmf/surface.hpp"

namespace kmf {

// seeded random band-limited field with smoothly decaying spectrum,
// normalized to the requested sup amplitude
inline Potential random_bandlimited(const SurfacePtr& s, Rng& rng, int band, double amplitude) {
  if (s->kind == SurfaceKind::sphere) {
    const auto& T = *s->sht;
    const int lmax = std::min(band, T.lmax());
    const int mmax = std::min(lmax, T.mmax());
    Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(T.coeff_count());
    for (int m = 0; m <= mmax; ++m)
      for (int l = std::max(1, m); l <= lmax; ++l) {
        const double decay = 1.0 / (1.0 + 0.1 * l * l);
        coef[T.coeff_index(l, m)] =
            decay * std::complex<double>(rng.normal(), m == 0 ? 0.0 : rng.normal());
      }
    Eigen::VectorXd v = T.synthesize(coef);
    const double sup = v.cwiseAbs().maxCoeff();
    if (sup > 0.0) v *= amplitude / sup;
    return {s, std::move(v)};
  }
  const auto& F = *s->fft;
  Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(s->num_nodes());
  const int kmax = std::min(band, s->n / 2 - 1);
  for (int ja = -kmax; ja <= kmax; ++ja)
    for (int jb = -kmax; jb <= kmax; ++jb) {
      if (ja == 0 && jb == 0) continue;
      if (ja < 0 || (ja == 0 && jb < 0)) continue;  // fix conjugate half
      const double k2 = F.lattice_norm2(ja, jb);
      const double decay = 1.0 / (1.0 + 2.0 * k2);
      const std::complex<double> a(rng.normal(), rng.normal());
      const int ia = (ja % s->n + s->n) % s->n, ib = (jb % s->n + s->n) % s->n;
      const int ian = ((-ja) % s->n + s->n) % s->n, ibn = ((-jb) % s->n + s->n) % s->n;
      coef[ib * s->n + ia] = decay * a;
      coef[ibn * s->n + ian] = decay * std::conj(a);
    }
  Eigen::VectorXd v = F.synthesize(coef);
  const double sup = v.cwiseAbs().maxCoeff();
  if (sup > 0.0) v *= amplitude / sup;
  return {s, std::move(v)};
}

// smooth zonal bump u(c) = height * exp(-(c-center)^2 / width^2) on the sphere
inline Potential zonal_bump(const SurfacePtr& s, double center, double width, double height) {
  if (s->kind != SurfaceKind::sphere) throw std::invalid_argument("zonal_bump: sphere only");
  Eigen::VectorXd v(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) {
    const double d = (s->node_cos_theta(i) - center) / width;
    v[i] = height * std::exp(-d * d);
  }
  return {s, std::move(v)};
}

// rescale u so that omega_u >= margin * (reference density): largest t <= 1
// with V + t * ddc u >= margin * V nodewise
inline Potential scale_to_psh(const SurfacePtr& s, const Potential& u, double V, double margin) {
  const Density d = ddc(s, u);
  const double worst = d.values.minCoeff();
  double t = 1.0;
  if (worst < 0.0) t = std::min(1.0, (margin - 1.0) * V / worst);
  return {s, t * u.values};
}

}  // namespace kmf
