#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "kmf/bergman.hpp"
#include "kmf/bundle.hpp"
#include "kmf/calculus.hpp"

namespace kmf {

// L^2(e^{-psi})-minimal solution of dbar(alpha) = g for sections of L + K_X
// over the sphere, psi = k psi_0 + u. Sections are represented in the chart
// by the truncated smooth family E_{a,b,c} = z^a zbar^b (1+|z|^2)^{-c} with
// a + b - 2c <= m (finite weighted norm); the family is dbar-closed and its
// kernel intersected with L^2 is exactly H^0, so the minimal solution of a
// dbar-exact right-hand side is an orthogonal projection off the holomorphic
// subspace. Norms are reported up to the common factor 2*pi:
//   |alpha|^2 = int |a|^2 rho_m e^{-u} omega_0,
//   |g|^2     = int |G|^2 / curv rho_m e^{-u} omega_0,
// where curv = k h_FS + u_zzbar is the chart coefficient of 2 pi omega_psi.
struct DbarResult {
  Eigen::VectorXcd alpha;   // nodal values of the minimal solution
  Eigen::VectorXcd g;       // nodal values of the dzbar-coefficient of g
  double norm_alpha2 = 0.0;
  double norm_g2 = 0.0;
  double fit_residual = 0.0;   // family-fit residual of g (0 for exact data)
  double hol_projection = 0.0; // |<alpha, H^0 basis>| after projection
  bool equality_case = false;
};

namespace detail {

struct FamilyElem {
  int a, b, c;
};

inline std::vector<FamilyElem> section_family(int m, int cmax) {
  std::vector<FamilyElem> out;
  for (int c = 0; c <= cmax; ++c)
    for (int a = 0; a + 0 <= m + 2 * c; ++a)
      for (int b = 0; a + b - 2 * c <= m; ++b) out.push_back({a, b, c});
  return out;
}

inline std::complex<double> eval_elem(const FamilyElem& e, std::complex<double> z) {
  const double opz2 = 1.0 + std::norm(z);
  return std::pow(z, e.a) * std::pow(std::conj(z), e.b) * std::pow(opz2, -e.c);
}

// dbar E_{a,b,c} = b E_{a,b-1,c} - c E_{a+1,b,c+1}
inline std::complex<double> eval_elem_dbar(const FamilyElem& e, std::complex<double> z) {
  std::complex<double> v = 0.0;
  if (e.b > 0) v += static_cast<double>(e.b) * eval_elem({e.a, e.b - 1, e.c}, z);
  if (e.c > 0) v -= static_cast<double>(e.c) * eval_elem({e.a + 1, e.b, e.c + 1}, z);
  return v;
}

}  // namespace detail

// curvature chart coefficient k h_FS + u_zzbar = h_FS (V + ddc u / omega_0)
inline Eigen::VectorXd curvature_coeff(const BundlePtr& b, const Potential& u) {
  const Density d = ddc(b->surface, u);
  Eigen::VectorXd out(b->surface->num_nodes());
  for (int i = 0; i < b->surface->num_nodes(); ++i) {
    out[i] = omega0_chart_coeff(b->surface, i) * (b->V() + d.values[i]);
  }
  return out;
}

namespace detail {

inline DbarResult finish(const BundlePtr& b, const Potential& u, Eigen::VectorXcd alpha,
                         Eigen::VectorXcd gvals, double fit_residual) {
  const auto& W = b->surface->quad;
  const Eigen::VectorXd curv = curvature_coeff(b, u);
  double mass_degenerate = 0.0;
  for (int i = 0; i < W.size(); ++i)
    if (curv[i] <= 1e-12) mass_degenerate += W[i];
  if (mass_degenerate > 0.0)
    throw std::runtime_error("dbar_minimal: curvature degenerate on positive quadrature mass");

  const Eigen::VectorXd wse =
      W.cwiseProduct(b->rho_m).cwiseProduct((-u.values.array()).exp().matrix());

  // project off H^0 in the psi-inner product
  const GramState st = gram(b, u);
  Eigen::VectorXcd rhs(b->N);
  for (int j = 0; j < b->N; ++j) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < W.size(); ++i) acc += wse[i] * alpha[i] * std::conj(st.on_basis(i, j));
    rhs[j] = acc;
  }
  for (int i = 0; i < W.size(); ++i) alpha[i] -= (st.on_basis.row(i) * rhs)(0, 0);

  DbarResult r;
  r.fit_residual = fit_residual;
  double na = 0.0, ng = 0.0, hp = 0.0;
  for (int i = 0; i < W.size(); ++i) {
    na += wse[i] * std::norm(alpha[i]);
    ng += wse[i] * std::norm(gvals[i]) / curv[i];
  }
  for (int j = 0; j < b->N; ++j) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < W.size(); ++i) acc += wse[i] * alpha[i] * std::conj(st.on_basis(i, j));
    hp = std::max(hp, std::abs(acc));
  }
  r.alpha = std::move(alpha);
  r.g = std::move(gvals);
  r.norm_alpha2 = na;
  r.norm_g2 = ng;
  r.hol_projection = hp;
  return r;
}

}  // namespace detail

// generic case: g = dbar(beta) for beta given by coefficients in the section
// family at truncation cmax
inline DbarResult dbar_minimal_from_family(const BundlePtr& b, const Potential& u,
                                           const Eigen::VectorXcd& beta_coeffs, int cmax) {
  if (!b->is_sphere()) throw std::invalid_argument("dbar_minimal: sphere setups only");
  const auto fam = detail::section_family(b->m(), cmax);
  if (beta_coeffs.size() != static_cast<Eigen::Index>(fam.size()))
    throw std::invalid_argument("dbar_minimal: coefficient count does not match family");
  const int nn = b->surface->num_nodes();
  Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(nn);
  Eigen::VectorXcd gvals = Eigen::VectorXcd::Zero(nn);
  for (int i = 0; i < nn; ++i) {
    const auto z = b->surface->chart_point(i);
    for (size_t k = 0; k < fam.size(); ++k) {
      if (beta_coeffs[k] == 0.0) continue;
      alpha[i] += beta_coeffs[k] * detail::eval_elem(fam[k], z);
      gvals[i] += beta_coeffs[k] * detail::eval_elem_dbar(fam[k], z);
    }
  }
  return detail::finish(b, u, std::move(alpha), std::move(gvals), 0.0);
}

// equality case: g = (2 pi omega_psi chart coefficient) * h with h in H^0;
// the minimal solution is D^{1,0} h = h' - (k dz psi_0 + dz u) h in closed
// form and the two norms agree
inline DbarResult dbar_minimal_holomorphic_source(const BundlePtr& b, const Potential& u,
                                                  const Eigen::VectorXcd& h_coeffs) {
  if (!b->is_sphere()) throw std::invalid_argument("dbar_minimal: sphere setups only");
  if (h_coeffs.size() != b->m() + 1)
    throw std::invalid_argument("dbar_minimal: h must be a degree-m polynomial");
  const int nn = b->surface->num_nodes();
  const Eigen::VectorXd curv = curvature_coeff(b, u);
  const Eigen::VectorXcd du = dzbar(b->surface, u);  // dz u = conj for real u
  Eigen::VectorXcd alpha(nn), gvals(nn);
  for (int i = 0; i < nn; ++i) {
    const auto z = b->surface->chart_point(i);
    std::complex<double> h = 0.0, hp = 0.0, zp = 1.0;
    for (int j = 0; j <= b->m(); ++j) {
      if (j > 0) hp += static_cast<double>(j) * h_coeffs[j] * zp / z;
      h += h_coeffs[j] * zp;
      zp *= z;
    }
    // stable h' for z near 0
    if (std::abs(z) < 1e-9) {
      hp = b->m() >= 1 ? h_coeffs[1] : 0.0;
    }
    const std::complex<double> dpsi =
        b->V() * std::conj(z) / (1.0 + std::norm(z)) + std::conj(du[i]);
    alpha[i] = hp - dpsi * h;
    gvals[i] = curv[i] * h;
  }
  auto r = detail::finish(b, u, std::move(alpha), std::move(gvals), 0.0);
  r.equality_case = true;
  return r;
}

// grid data: fit g onto the dbar-image of the family first (weighted least
// squares), then proceed as in the exact case; fit_residual reports the
// weighted misfit
inline DbarResult dbar_minimal_from_grid(const BundlePtr& b, const Potential& u,
                                         const Eigen::VectorXcd& gvals, int cmax) {
  if (!b->is_sphere()) throw std::invalid_argument("dbar_minimal: sphere setups only");
  const auto fam = detail::section_family(b->m(), cmax);
  const int nn = b->surface->num_nodes();
  if (gvals.size() != nn) throw std::invalid_argument("dbar_minimal: g size mismatch");
  const Eigen::VectorXd curv = curvature_coeff(b, u);
  const Eigen::VectorXd wse = b->surface->quad.cwiseProduct(b->rho_m)
                                  .cwiseProduct((-u.values.array()).exp().matrix());
  Eigen::MatrixXcd D(nn, fam.size());
  for (int i = 0; i < nn; ++i) {
    const auto z = b->surface->chart_point(i);
    for (size_t k = 0; k < fam.size(); ++k) D(i, k) = detail::eval_elem_dbar(fam[k], z);
  }
  Eigen::VectorXd sq(nn);
  for (int i = 0; i < nn; ++i) sq[i] = std::sqrt(wse[i] / curv[i]);
  Eigen::MatrixXcd Dw = sq.asDiagonal() * D;
  Eigen::VectorXcd gw = sq.asDiagonal() * gvals;
  Eigen::VectorXcd coef = Dw.colPivHouseholderQr().solve(gw);
  const double resid = (Dw * coef - gw).norm();
  auto r = dbar_minimal_from_family(b, u, coef, cmax);
  r.fit_residual = resid;
  r.g = gvals;  // keep caller's data
  return r;
}

}  // namespace kmf
