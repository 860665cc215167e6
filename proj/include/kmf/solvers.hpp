#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kmf/bergman.hpp"
#include "kmf/bundle.hpp"
#include "kmf/calculus.hpp"
#include "kmf/functionals.hpp"
#include "kmf/mobius.hpp"

namespace kmf {

struct SolveReport {
  Potential solution;        // gauge: int u omega_0 = 0
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string normalization;
  double pde_shift = 0.0;  // solution + pde_shift is the PDE-normalized representative
  double multistart_spread = 0.0;
};

namespace detail {

inline void mean_zero(const SurfacePtr& s, Eigen::VectorXd& v) {
  const double m = s->quad.dot(v);
  if (std::abs(m) > 1e-15 * (1.0 + v.cwiseAbs().maxCoeff())) v.array() -= m;
}

// preconditioned conjugate gradients on mean-zero fields for an SPD operator
inline Eigen::VectorXd pcg(const SurfacePtr& s,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& Minv,
                           const Eigen::VectorXd& rhs, double tol, int max_iter, bool* ok) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  mean_zero(s, r);
  Eigen::VectorXd z = Minv(r);
  mean_zero(s, z);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const double r0 = r.norm();
  if (ok) *ok = true;
  for (int it = 0; it < max_iter; ++it) {
    if (r.norm() <= tol * r0) break;
    Eigen::VectorXd Ap = A(p);
    mean_zero(s, Ap);
    const double pAp = p.dot(Ap);
    if (pAp <= 0.0) {  // indefinite direction; bail with the current iterate
      if (ok) *ok = false;
      break;
    }
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    z = Minv(r);
    mean_zero(s, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return x;
}

}  // namespace detail

// --- sphere critical points ---------------------------------------------------
//
// Euler-Lagrange equation omega_u / V = beta_u, solved by a damped spectral
// fixed point u <- u + theta V (ddc)^{-1}(beta_u - omega_u/V) with theta
// halving on residual growth; constants are quotiented by the mean-zero
// gauge.
inline SolveReport solve_critical_sphere(const BundlePtr& b, const Potential& u_init,
                                         double tol = 1e-9, int max_iter = 400) {
  if (!b->is_sphere()) throw std::invalid_argument("solve_critical_sphere: sphere setups only");
  const auto& s = b->surface;
  Eigen::VectorXd u = u_init.values;
  detail::mean_zero(s, u);

  auto residual_field = [&](const Eigen::VectorXd& uv) {
    const Density beta = bergman_measure(gram(b, Potential{s, uv}));
    const Density d = ddc(s, Potential{s, uv});
    return Eigen::VectorXd(beta.values.array() - 1.0 - d.values.array() / b->V());
  };

  SolveReport rep;
  double theta = 1.0;
  Eigen::VectorXd r = residual_field(u);
  double rn = r.cwiseAbs().maxCoeff();
  int grow_streak = 0;
  int it = 0;
  for (; it < max_iter && rn >= tol; ++it) {
    const Potential dir = inv_ddc(s, b->V() * r);
    Eigen::VectorXd u_new = u + theta * dir.values;
    detail::mean_zero(s, u_new);
    Eigen::VectorXd r_new = residual_field(u_new);
    const double rn_new = r_new.cwiseAbs().maxCoeff();
    if (rn_new < rn) {
      u = std::move(u_new);
      r = std::move(r_new);
      rn = rn_new;
      theta = std::min(1.0, 1.3 * theta);
      grow_streak = 0;
    } else {
      theta *= 0.5;
      if (theta < 1.0 / 64.0) {
        if (++grow_streak > 50) break;
        theta = 1.0 / 64.0;
      }
    }
  }
  rep.solution = Potential{s, u};
  rep.residual = rn;
  rep.iterations = it;
  rep.converged = rn < tol;
  rep.normalization = "mean-zero gauge";
  if (!rep.converged && theta <= 1.0 / 64.0)
    rep.normalization += "; damping floor reached";
  return rep;
}

// Moebius normalization: boost the solution until the center of mass of
// omega_u sits at the origin. Coordinate descent over the three boost
// subgroups, each zeroed by a secant solve on the measured center-of-mass
// component (insensitive to orientation conventions).
inline Potential mobius_normalize(const BundlePtr& b, const Potential& u, int max_rounds = 12) {
  const auto& s = b->surface;
  auto center = [&](const Mobius& T) {
    const Potential v = mobius_pullback(s, u, T, b->degree);
    const Density d = ddc(s, v);
    Eigen::Vector3d cm = Eigen::Vector3d::Zero();
    for (int i = 0; i < s->num_nodes(); ++i)
      cm += s->quad[i] * (b->V() + d.values[i]) / b->V() * s->embed(i);
    return cm;
  };
  // boost subgroups about the three axes: rotate the axis to z, boost, undo
  const std::complex<double> I(0.0, 1.0);
  const double rh = M_SQRT1_2;
  const Mobius Ry{{rh, 0.0}, {-rh, 0.0}, {rh, 0.0}, {rh, 0.0}};   // x <-> z
  const Mobius RyInv{{rh, 0.0}, {rh, 0.0}, {-rh, 0.0}, {rh, 0.0}};
  const Mobius Rx{{rh, 0.0}, rh * I, rh * I, {rh, 0.0}};          // y <-> z
  const Mobius RxInv{{rh, 0.0}, -rh * I, -rh * I, {rh, 0.0}};
  auto boost_about = [&](int axis, double t) -> Mobius {
    Mobius bz{{std::exp(0.5 * t), 0.0}, {0.0, 0.0}, {0.0, 0.0}, {std::exp(-0.5 * t), 0.0}};
    if (axis == 2) return bz;
    if (axis == 0) return RyInv.compose(bz.compose(Ry));
    return RxInv.compose(bz.compose(Rx));
  };

  Mobius total;
  for (int round = 0; round < max_rounds; ++round) {
    const Eigen::Vector3d cm0 = center(total);
    if (cm0.norm() < 1e-9) break;
    for (int axis = 0; axis < 3; ++axis) {
      // secant on f(t) = cm_axis(boost_axis(t) composed with total)
      double t0 = 0.0, f0 = center(boost_about(axis, 0.0).compose(total))[axis];
      if (std::abs(f0) < 1e-10) continue;
      double t1 = f0 > 0 ? 0.5 : -0.5;
      double f1 = center(boost_about(axis, t1).compose(total))[axis];
      for (int it = 0; it < 25 && std::abs(f1) > 1e-11 && std::abs(f1 - f0) > 1e-15; ++it) {
        const double t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
        t0 = t1;
        f0 = f1;
        t1 = std::min(4.0, std::max(-4.0, t2));
        f1 = center(boost_about(axis, t1).compose(total))[axis];
      }
      total = boost_about(axis, t1).compose(total);
    }
  }
  Eigen::VectorXd v = mobius_pullback(s, u, total, b->degree).values;
  detail::mean_zero(s, v);
  return {s, v};
}

// --- torus mean-field equations -------------------------------------------------

enum class MeanFieldMode { i, ii, q };

namespace detail {

// Newton-Krylov solve of the gauge-invariant q-family equation
//   ddc u = mu_q(u) - omega_0,   mu_q = e^{q(g_p - u)} / int e^{q(g_p - u)}
// (q = 1 with an overall (1+delta) curvature factor recovers the vortex
// equation (i)). The linearized operator in variance form is SPD at critical
// points for eta <= 4 pi, which Newton-CG exploits; steps backtrack on the
// sup-norm residual.
struct TorusCore {
  BundlePtr b;
  double q = 1.0;      // exponent in the weight
  double lead = 1.0;   // curvature factor in front of ddc u

  Eigen::VectorXd weight(const Eigen::VectorXd& u) const {  // e^{q(g_p - u)}
    const auto& s = b->surface;
    Eigen::VectorXd w(s->num_nodes());
    for (int i = 0; i < s->num_nodes(); ++i)
      w[i] = i == b->marked_point
                 ? 0.0
                 : std::exp(q * (b->green->value(i) - u[i]));
    return w;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& u) const {
    const auto& s = b->surface;
    Eigen::VectorXd w = weight(u);
    const double Z = s->quad.dot(w);
    const Density d = ddc(s, Potential{s, u});
    return Eigen::VectorXd(w.array() / Z - 1.0 - lead * d.values.array());
  }

  SolveReport solve(const Eigen::VectorXd& u0, double tol, int max_iter) const {
    const auto& s = b->surface;
    Eigen::VectorXd u = u0;
    mean_zero(s, u);
    SolveReport rep;
    Eigen::VectorXd r = residual(u);
    double rn = r.cwiseAbs().maxCoeff();
    int it = 0;
    for (; it < max_iter && rn >= tol; ++it) {
      Eigen::VectorXd w = weight(u);
      const double Z = s->quad.dot(w);
      const Eigen::VectorXd mu = w / Z;  // probability density
      // Newton operator A[v] = lead*(-ddc v) - q (mu v - mu int v mu), the
      // second variation of -F; SPD on mean-zero near critical points in the
      // covered range
      auto A = [&](const Eigen::VectorXd& v) {
        const Density dv = ddc(s, Potential{s, v});
        const double avg = s->quad.dot(mu.cwiseProduct(v));
        return Eigen::VectorXd(-lead * dv.values.array() -
                               q * (mu.array() * (v.array() - avg)));
      };
      auto Minv = [&](const Eigen::VectorXd& v) {
        // spectral inverse of lead*(-ddc) + small shift
        const auto& fft = *s->fft;
        auto coef = fft.analyze(v);
        fft.for_each_mode([&](int idx, int ja, int jb) {
          coef[idx] /= lead * (-fft.ddc_multiplier(ja, jb)) + 0.25 * q;
        });
        return fft.synthesize(coef);
      };
      // Newton: dr = A, so the step solves A[step] = -r
      bool cg_ok = true;
      Eigen::VectorXd step = pcg(s, A, Minv, Eigen::VectorXd(-r), 1e-10, 200, &cg_ok);
      if (!cg_ok || !step.allFinite()) {
        // fall back to a damped spectral gradient step
        step = inv_ddc(s, Eigen::VectorXd(r / lead)).values;
      }
      double theta = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt) {
        Eigen::VectorXd u_new = u + theta * step;
        mean_zero(s, u_new);
        Eigen::VectorXd r_new = residual(u_new);
        const double rn_new = r_new.cwiseAbs().maxCoeff();
        if (rn_new < rn) {
          u = std::move(u_new);
          r = std::move(r_new);
          rn = rn_new;
          accepted = true;
          break;
        }
        theta *= 0.5;
      }
      if (!accepted) break;  // stalled; report the residual honestly
    }
    rep.solution = Potential{s, u};
    rep.residual = rn;
    rep.iterations = it;
    rep.converged = rn < tol;
    return rep;
  }
};

}  // namespace detail

// mean-field solve on the torus: mode i is Delta u = eta (e^{g_p-u} - 1)
// under int e^{g_p-u} = 1 (the normalization forced by integrating the
// equation); mode q solves omega_0 + ddc u = e^{q(g_p-u)} omega_0 with
// q = eta/4pi; mode ii returns w - (eta/4pi) g_p for the singular equation
// Delta w + eta e^w = eta delta_p, through the identity w = q (g_p - u).
inline SolveReport solve_mean_field(const SurfacePtr& s, int marked_node, double eta,
                                    MeanFieldMode mode, const Potential& u_init,
                                    double tol = 1e-9, int max_iter = 120,
                                    const BundlePtr& bundle_cache = nullptr) {
  if (s->kind != SurfaceKind::torus)
    throw std::invalid_argument("solve_mean_field: torus surfaces only");
  if (!(eta > 0.0 && eta <= 8.0 * M_PI))
    throw std::invalid_argument("solve_mean_field: eta must lie in (0, 8 pi]");
  BundlePtr b = bundle_cache ? bundle_cache : make_torus_bundle(s, marked_node);
  if (b->marked_point != marked_node)
    throw std::invalid_argument("solve_mean_field: bundle cache marks a different node");

  detail::TorusCore core;
  core.b = b;
  const double q = eta / (4.0 * M_PI);
  if (mode == MeanFieldMode::i) {
    core.q = 1.0;
    core.lead = 1.0 / q;  // (1+delta) = 4pi/eta
  } else {
    if (mode == MeanFieldMode::q && !(q > 0.0 && q < 1.0))
      throw std::invalid_argument("solve_mean_field: mode q requires 0 < eta/4pi < 1");
    core.q = q;
    core.lead = 1.0;
  }

  Eigen::VectorXd u0 = u_init.values;
  SolveReport rep = core.solve(u0, tol, max_iter);
  if (!rep.converged) {
    // homotopy from a quarter of the target strength
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(s->num_nodes());
    for (double frac : {0.25, 0.5, 0.75, 1.0}) {
      detail::TorusCore stage = core;
      if (mode == MeanFieldMode::i)
        stage.lead = 1.0 / (q * frac);
      else
        stage.q = q * frac;
      auto r2 = stage.solve(cur, tol, max_iter);
      cur = r2.solution.values;
      if (frac == 1.0) rep = r2;
    }
  }

  // PDE-normalized representative: constant c with int e^{q(g - u - c)} = 1
  const Eigen::VectorXd w = core.weight(rep.solution.values);
  const double Z = s->quad.dot(w);
  const double shift_u = std::log(Z) / core.q;

  if (mode == MeanFieldMode::ii) {
    // w_tilde = q (g_p - u_pde); return the smooth part relative to
    // (eta/4pi) g_p, mean-zero, with the constant in pde_shift
    Eigen::VectorXd phi = -q * (rep.solution.values.array() + shift_u);
    const double mean_phi = s->quad.dot(phi);
    phi.array() -= mean_phi;
    rep.solution = Potential{s, phi};
    rep.pde_shift = mean_phi;
    rep.normalization = "mean-zero gauge; w = (eta/4pi) g_p + phi + shift";
  } else {
    rep.pde_shift = shift_u;
    rep.normalization = "mean-zero gauge; mean-field shift fixes int e^{q(g-u)} = 1";
  }
  return rep;
}

// sup-norm residual of the literal mode-i equation
// Delta u = eta (e^{g_p - u} - 1) for the PDE-normalized representative
inline double mean_field_residual_i(const SurfacePtr& s, const BundlePtr& b, double eta,
                                    const SolveReport& rep) {
  const Eigen::VectorXd u_pde = rep.solution.values.array() + rep.pde_shift;
  const Density d = ddc(s, Potential{s, rep.solution.values});
  double worst = 0.0;
  for (int i = 0; i < s->num_nodes(); ++i) {
    const double e = i == b->marked_point ? 0.0 : std::exp(b->green->value(i) - u_pde[i]);
    worst = std::max(worst, std::abs(4.0 * M_PI * d.values[i] - eta * (e - 1.0)));
  }
  return worst;
}

// --- linearization spectra -------------------------------------------------------
//
// Smallest eigenvalues of the second variation of -F at u, restricted to
// mean-zero fields, by a dense Rayleigh-Ritz reduction onto a band-limited
// spectral basis. Sphere: A[v] = (-ddc v)/V + R_u[v]; torus:
// A[v] = lead*(-ddc v) - (mu v - mu int v mu) for the mode-i weight.
inline std::vector<double> linearization_min_eig(const BundlePtr& b, const Potential& u,
                                                 int n_eigs, double eta = 4.0 * M_PI,
                                                 int band = 0) {
  const auto& s = b->surface;
  std::vector<Eigen::VectorXd> basis;
  if (b->is_sphere()) {
    const int lmax = band > 0 ? band : 12;
    const auto& T = *s->sht;
    for (int m = 0; m <= std::min(lmax, T.mmax()); ++m)
      for (int l = std::max(1, m); l <= lmax; ++l)
        for (int part = 0; part < (m == 0 ? 1 : 2); ++part) {
          Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(T.coeff_count());
          // real/imaginary parts of the m-mode, normalized in L^2(omega_0)
          coef[T.coeff_index(l, m)] =
              m == 0 ? 1.0
                     : std::complex<double>(part == 0 ? M_SQRT1_2 : 0.0,
                                            part == 0 ? 0.0 : M_SQRT1_2);
          basis.push_back(T.synthesize(coef));
        }
  } else {
    const int kmax = band > 0 ? band : 10;
    const int n = s->n;
    for (int ja = -kmax; ja <= kmax; ++ja)
      for (int jb = -kmax; jb <= kmax; ++jb) {
        if (ja == 0 && jb == 0) continue;
        if (ja < 0 || (ja == 0 && jb < 0)) continue;
        Eigen::VectorXd vc(s->num_nodes()), vs(s->num_nodes());
        for (int ib = 0; ib < n; ++ib)
          for (int ia = 0; ia < n; ++ia) {
            const double ph = 2.0 * M_PI * (ja * ia + jb * ib) / n;
            vc[ib * n + ia] = M_SQRT2 * std::cos(ph);
            vs[ib * n + ia] = M_SQRT2 * std::sin(ph);
          }
        basis.push_back(vc);
        basis.push_back(vs);
      }
  }

  const int M = static_cast<int>(basis.size());
  Eigen::MatrixXd applied(s->num_nodes(), M);
  if (b->is_sphere()) {
    const GramState st = gram(b, u);
    for (int k = 0; k < M; ++k) {
      const Density dv = ddc(s, Potential{s, basis[k]});
      const Density rv = R_op(st, Potential{s, basis[k]});
      applied.col(k) = -dv.values / b->V() + rv.values;
    }
  } else {
    const double q = eta / (4.0 * M_PI);
    detail::TorusCore core;
    core.b = b;
    core.q = 1.0;
    core.lead = 1.0 / q;
    Eigen::VectorXd w = core.weight(u.values);
    const Eigen::VectorXd mu = w / s->quad.dot(w);
    for (int k = 0; k < M; ++k) {
      const Density dv = ddc(s, Potential{s, basis[k]});
      const double avg = s->quad.dot(mu.cwiseProduct(basis[k]));
      applied.col(k) = -core.lead * dv.values -
                       (mu.array() * (basis[k].array() - avg)).matrix();
    }
  }
  Eigen::MatrixXd Bmat(M, M);
  for (int a = 0; a < M; ++a)
    for (int c = 0; c < M; ++c)
      Bmat(a, c) = s->quad.dot(basis[a].cwiseProduct(applied.col(c)));
  Bmat = 0.5 * (Bmat + Bmat.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bmat);
  std::vector<double> out;
  for (int k = 0; k < std::min(n_eigs, M); ++k) out.push_back(es.eigenvalues()[k]);
  return out;
}

// --- continuation in eta ----------------------------------------------------------

struct ContinuationRow {
  double eta = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double min_eig = 0.0;
  Potential solution;
};

// predictor-corrector continuation of the mode-i family, seeding each solve
// from the secant extrapolation of the previous two solutions; rows record
// where Newton first fails or the spectrum crosses zero
inline std::vector<ContinuationRow> continuation_in_eta(const SurfacePtr& s, int marked_node,
                                                        const std::vector<double>& eta_grid,
                                                        double tol = 1e-9,
                                                        bool halt_on_failure = false) {
  BundlePtr b = make_torus_bundle(s, marked_node);
  std::vector<ContinuationRow> rows;
  Eigen::VectorXd prev, prev2;
  double eta_prev = 0.0, eta_prev2 = 0.0;
  for (double eta : eta_grid) {
    Eigen::VectorXd seed;
    if (prev.size() == 0)
      seed = Eigen::VectorXd::Zero(s->num_nodes());
    else if (prev2.size() == 0)
      seed = prev;
    else
      seed = prev + (prev - prev2) * ((eta - eta_prev) / (eta_prev - eta_prev2));
    auto rep = solve_mean_field(s, marked_node, eta, MeanFieldMode::i, Potential{s, seed}, tol,
                                120, b);
    ContinuationRow row;
    row.eta = eta;
    row.residual = rep.residual;
    row.iterations = rep.iterations;
    row.converged = rep.converged;
    row.solution = rep.solution;
    if (rep.converged) {
      auto eigs = linearization_min_eig(b, rep.solution, 1, eta);
      row.min_eig = eigs.empty() ? 0.0 : eigs[0];
      prev2 = prev;
      prev = rep.solution.values;
      eta_prev2 = eta_prev;
      eta_prev = eta;
    }
    rows.push_back(row);
    if (!rep.converged && halt_on_failure) break;
  }
  return rows;
}

}  // namespace kmf
