#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "kmf/bundle.hpp"
#include "kmf/calculus.hpp"
#include "kmf/functionals.hpp"
#include "kmf/surface.hpp"

namespace kmf {

// --- symmetric second-order Dirichlet operator -------------------------------
//
// Sparse stiffness K with u^T K v ~ int du ^ d^c v, assembled from edge
// conductances (finite-volume form). K is a symmetric M-matrix with kernel
// the constants, which makes the projected Gauss-Seidel obstacle solver
// monotone; the induced dd^c density is -(K u)_i / W_i.
struct DirichletOperator {
  SurfacePtr surface;
  std::vector<std::vector<std::pair<int, double>>> nbr;  // off-diagonal -k_e
  Eigen::VectorXd diag;

  double form(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    double acc = 0.0;
    for (int i = 0; i < diag.size(); ++i) {
      double row = diag[i] * v[i];
      for (const auto& [j, k] : nbr[i]) row -= k * v[j];
      acc += u[i] * row;
    }
    return acc;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {  // K u
    Eigen::VectorXd out(diag.size());
    for (int i = 0; i < diag.size(); ++i) {
      double row = diag[i] * u[i];
      for (const auto& [j, k] : nbr[i]) row -= k * u[j];
      out[i] = row;
    }
    return out;
  }

  Eigen::VectorXd ddc_density(const Eigen::VectorXd& u) const {
    return -apply(u).cwiseQuotient(surface->quad);
  }
};

inline DirichletOperator build_dirichlet_operator(const SurfacePtr& s) {
  DirichletOperator op;
  op.surface = s;
  const int nn = s->num_nodes();
  op.nbr.assign(nn, {});
  op.diag = Eigen::VectorXd::Zero(nn);
  auto add_edge = [&](int i, int j, double k) {
    op.nbr[i].push_back({j, k});
    op.nbr[j].push_back({i, k});
    op.diag[i] += k;
    op.diag[j] += k;
  };
  if (s->kind == SurfaceKind::sphere) {
    const int nt = s->n_theta, np = s->n_phi;
    const double dphi = 2.0 * M_PI / np;
    // theta edges between adjacent rings
    for (int i = 0; i + 1 < nt; ++i) {
      const double cm = 0.5 * (s->cos_theta[i] + s->cos_theta[i + 1]);
      const double dc = s->cos_theta[i + 1] - s->cos_theta[i];
      const double k = (1.0 - cm * cm) * dphi / dc / (4.0 * M_PI);
      for (int j = 0; j < np; ++j) add_edge(i * np + j, (i + 1) * np + j, k);
    }
    // phi edges around each ring; cell width in c from the ring weights
    for (int i = 0; i < nt; ++i) {
      const double dc = 2.0 * s->ring_weight[i];
      const double c = s->cos_theta[i];
      const double k = dc / (1.0 - c * c) / dphi / (4.0 * M_PI);
      for (int j = 0; j < np; ++j) add_edge(i * np + j, i * np + (j + 1) % np, k);
    }
  } else {
    const int n = s->n;
    const double t1 = s->tau.real(), t2 = s->tau.imag();
    const double alpha = (t2 / (4.0 * M_PI)) * (1.0 + t1 * t1 / (t2 * t2));
    const double gamma = (t2 / (4.0 * M_PI)) / (t2 * t2);
    const double beta = -(t2 / (4.0 * M_PI)) * (t1 / (t2 * t2));
    const double ab = std::abs(beta);
    if (ab > std::min(alpha, gamma) + 1e-14)
      throw std::invalid_argument(
          "build_dirichlet_operator: modulus outside the monotone stencil range; "
          "reduce tau to the fundamental domain");
    const double ka = alpha - ab, kb = gamma - ab;
    for (int ib = 0; ib < n; ++ib)
      for (int ia = 0; ia < n; ++ia) {
        const int idx = ib * n + ia;
        add_edge(idx, ib * n + (ia + 1) % n, ka);
        add_edge(idx, ((ib + 1) % n) * n + ia, kb);
        if (ab > 1e-15) {
          // diagonal direction carrying the mixed term: (1,-1) for beta<0
          const int ja = (ia + 1) % n;
          const int jb = beta < 0.0 ? (ib - 1 + n) % n : (ib + 1) % n;
          add_edge(idx, jb * n + ja, ab);
        }
      }
  }
  return op;
}

// E evaluated through the discrete Dirichlet form; consistent with the
// obstacle solver below, so the envelope theorem for E o P holds exactly at
// the discrete level
inline double energy_E_discrete(const DirichletOperator& op, double V, const Potential& u) {
  return op.surface->quad.dot(u.values) - op.form(u.values, u.values) / (2.0 * V);
}

// the measure omega_{Pu}/V of the discrete operator (unit total mass;
// vanishes off the contact set at an LCP solution)
inline Eigen::VectorXd envelope_measure(const DirichletOperator& op, double V,
                                        const Potential& pu) {
  return (V * op.surface->quad - op.apply(pu.values)) / V;
}

// --- psh projection (discrete obstacle problem) ------------------------------

struct ProjectReport {
  Potential result;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// largest v <= u with omega_0 + dd^c v >= 0, as the complementarity problem
//   u - v >= 0,  W + ddc-flux(v) >= 0,  (u - v) * (W + flux) = 0.
// A primal-dual active-set pass (penalized sparse Cholesky solves) reaches
// the contact configuration quickly; projected SOR sweeps then polish and
// certify the residual.
namespace detail {

inline bool pdas_obstacle(const DirichletOperator& op, const Eigen::VectorXd& u,
                          double curv_scale, Eigen::VectorXd& v,
                          const Eigen::VectorXd* warm = nullptr) {
  const int nn = static_cast<int>(u.size());
  const auto& W = op.surface->quad;
  std::vector<char> active(nn, 1);
  if (warm)
    for (int i = 0; i < nn; ++i) active[i] = (*warm)[i] >= u[i] - 1e-11 ? 1 : 0;
  v = u;
  std::vector<int> compact(nn, -1);
  Eigen::VectorXd lam(nn);
  for (int pass = 0; pass < 80; ++pass) {
    // exact solve of the flux equations on the inactive set, contact values
    // substituted into the right-hand side
    int m = 0;
    for (int i = 0; i < nn; ++i) compact[i] = active[i] ? -1 : m++;
    if (m > 0) {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(static_cast<size_t>(m) * 6);
      Eigen::VectorXd rhs(m);
      for (int i = 0; i < nn; ++i) {
        if (active[i]) continue;
        const int r = compact[i];
        trip.emplace_back(r, r, op.diag[i]);
        double b = curv_scale * W[i];
        for (const auto& [j, k] : op.nbr[i]) {
          if (active[j])
            b += k * u[j];
          else
            trip.emplace_back(r, compact[j], -k);
        }
        rhs[r] = b;
      }
      Eigen::SparseMatrix<double> KII(m, m);
      KII.setFromTriplets(trip.begin(), trip.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(KII);
      if (chol.info() != Eigen::Success) return false;
      const Eigen::VectorXd vi = chol.solve(rhs);
      for (int i = 0; i < nn; ++i) v[i] = active[i] ? u[i] : vi[compact[i]];
    } else {
      v = u;
    }
    lam = curv_scale * W - op.apply(v);
    bool changed = false;
    for (int i = 0; i < nn; ++i) {
      if (active[i] && lam[i] < -1e-13 * curv_scale * W[i]) {
        active[i] = 0;
        changed = true;
      } else if (!active[i] && v[i] > u[i] + 1e-14) {
        active[i] = 1;
        changed = true;
      }
    }
    if (!changed) return true;
  }
  return true;  // near-converged sets; SOR polishing finishes the job
}

}  // namespace detail

inline ProjectReport project_psh_report(const DirichletOperator& op, const Potential& u,
                                        double tol = 1e-9, int max_iter = 20000,
                                        const Eigen::VectorXd* warm = nullptr,
                                        double curv_scale = 1.0) {
  require_same_surface(op.surface, u.surface);
  const auto& W = op.surface->quad;
  const int nn = op.surface->num_nodes();
  Eigen::VectorXd v;
  if (!detail::pdas_obstacle(op, u.values, curv_scale, v, warm))
    v = warm ? warm->cwiseMin(u.values) : u.values;
  v = v.cwiseMin(u.values);
  const double omega = 1.85;
  double resid = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    for (int i = 0; i < nn; ++i) {
      double off = 0.0;
      for (const auto& [j, k] : op.nbr[i]) off += k * v[j];
      // unconstrained solve of s W_i - (K v)_i = 0 in v_i
      const double vstar = (curv_scale * W[i] + off) / op.diag[i];
      const double vnew = v[i] + omega * (vstar - v[i]);
      v[i] = std::min(u.values[i], vnew);
    }
    if (it % 2 == 1 || it == 0 || it == max_iter - 1) {
      resid = 0.0;
      const Eigen::VectorXd Kv = op.apply(v);
      for (int i = 0; i < nn; ++i) {
        const double slack_u = u.values[i] - v[i];
        const double slack_c = (curv_scale * W[i] - Kv[i]) / W[i];
        resid = std::max(resid, std::abs(std::min(slack_u, slack_c)));
        resid = std::max(resid, -slack_c);  // constraint violation
      }
      if (resid < tol) {
        ++it;
        break;
      }
    }
  }
  ProjectReport rep;
  rep.result = Potential{op.surface, std::move(v)};
  rep.residual = resid;
  rep.iterations = it;
  rep.converged = resid < tol;
  return rep;
}

inline Potential project_psh(const SurfacePtr& s, const Potential& u, double tol = 1e-9,
                             double curv_scale = 1.0) {
  auto op = build_dirichlet_operator(s);
  auto rep = project_psh_report(op, u, tol, 20000, nullptr, curv_scale);
  if (!rep.converged)
    throw std::runtime_error("project_psh: no convergence, residual " +
                             std::to_string(rep.residual));
  return rep.result;
}

// --- metric paths -------------------------------------------------------------

struct MetricPath {
  SurfacePtr surface;
  std::vector<double> times;
  std::vector<Potential> samples;
  bool is_subgeodesic = false;
  bool is_geodesic = false;

  const Potential& at(int k) const { return samples[k]; }
  int steps() const { return static_cast<int>(times.size()); }
};

// bent subgeodesic (1-t) u0 + t u1 - A t(1-t); the bend buys positivity in
// the t-direction, A is calibrated against the mixed-derivative bound
struct BentReport {
  MetricPath path;
  double min_feasible_A = 0.0;
  double margin = 0.0;  // min over (t,x) of the curvature test
};

inline BentReport subgeodesic_bent(const SurfacePtr& s, const Potential& u0, const Potential& u1,
                                   double A, int K = 11, double curv_scale = 1.0) {
  require_same_surface(s, u0.surface);
  require_same_surface(s, u1.surface);
  if (A < 0.0) throw std::invalid_argument("subgeodesic_bent: A must be nonnegative");
  // curvature test: rho_omega(t,x) * h(x) * (2A) >= |dz(u1-u0)|^2 nodewise,
  // with rho_omega the affine-path density, minimized in t at an endpoint
  const Potential diff{s, u1.values - u0.values};
  const Eigen::VectorXcd dz = dzbar(s, diff);  // |dz f| = |dzbar f| for real f
  const Density r0 = ddc(s, u0), r1 = ddc(s, u1);
  double amin = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < s->num_nodes(); ++i) {
    const double rho = std::min(curv_scale + r0.values[i], curv_scale + r1.values[i]);
    const double h = omega0_chart_coeff(s, i);
    const double grad2 = std::norm(dz[i]);
    if (rho <= 0.0) {
      if (grad2 > 1e-18) amin = std::numeric_limits<double>::infinity();
      continue;
    }
    amin = std::max(amin, grad2 / (2.0 * h * rho));
    margin = std::min(margin, 2.0 * A * h * rho - grad2);
  }
  if (A < amin)
    throw std::runtime_error("subgeodesic_bent: A too small, minimal feasible A is " +
                             std::to_string(amin));
  BentReport rep;
  rep.min_feasible_A = amin;
  rep.margin = margin;
  rep.path.surface = s;
  rep.path.is_subgeodesic = true;
  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) / (K - 1);
    rep.path.times.push_back(t);
    rep.path.samples.push_back(
        Potential{s, (1.0 - t) * u0.values + t * u1.values -
                         Eigen::VectorXd::Constant(s->num_nodes(), A * t * (1.0 - t))});
  }
  return rep;
}

// --- geodesics ----------------------------------------------------------------

enum class GeodesicMethod { legendre, envelope };

namespace detail {

// Legendre-Fenchel conjugate of a convex function sampled on an ascending
// grid, with parabolic refinement around the discrete argmax; for ascending
// query batches the argmax is swept monotonically
class DiscreteConjugate {
 public:
  DiscreteConjugate(std::vector<double> x, std::vector<double> f)
      : x_(std::move(x)), f_(std::move(f)) {}

  double at(double p) const {
    int hint = 0;
    return eval(p, hint, true);
  }

  // queries must be ascending; argmax of the concave objective moves right
  std::vector<double> at_ascending(const std::vector<double>& ps) const {
    std::vector<double> out(ps.size());
    int hint = 0;
    for (size_t k = 0; k < ps.size(); ++k) out[k] = eval(ps[k], hint, false);
    return out;
  }

 private:
  double eval(double p, int& hint, bool global) const {
    const int n = static_cast<int>(x_.size());
    int best = hint;
    double bv = p * x_[best] - f_[best];
    if (global) {
      for (int i = 0; i < n; ++i) {
        const double v = p * x_[i] - f_[i];
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
    } else {
      while (best + 1 < n) {
        const double v = p * x_[best + 1] - f_[best + 1];
        if (v < bv) break;
        bv = v;
        ++best;
      }
    }
    hint = best;
    if (best == 0 || best == n - 1) return bv;
    const double xm = x_[best - 1], x0 = x_[best], xp = x_[best + 1];
    const double gm = p * xm - f_[best - 1], g0 = bv, gp = p * xp - f_[best + 1];
    const double d1 = (gp - gm) / (xp - xm);
    const double d2 = 2.0 * ((gp - g0) / ((xp - x0) * (xp - xm)) -
                             (gm - g0) / ((x0 - xm) * (xp - xm)));
    if (d2 >= -1e-300) return bv;
    const double dx = -d1 / d2;
    return g0 + d1 * dx + 0.5 * d2 * dx * dx;
  }

  std::vector<double> x_, f_;
};

inline bool is_zonal(const Potential& u) {
  const auto& s = *u.surface;
  for (int i = 0; i < s.n_theta; ++i) {
    const double first = u.values[i * s.n_phi];
    for (int j = 1; j < s.n_phi; ++j)
      if (std::abs(u.values[i * s.n_phi + j] - first) > 1e-10) return false;
  }
  return true;
}

// 1-D radial obstacle problem on a fine uniform grid in c = cos(theta):
// largest v <= u with s_curv * w_i - (K v)_i >= 0 for the radial stiffness
// k_{i+1/2} = (1/2)(1 - c_mid^2)/dc, w_i the dc/2 cell masses. Solved by a
// primal-dual active set iteration; each inactive segment is a tridiagonal
// solve.
class RadialObstacle {
 public:
  explicit RadialObstacle(int m) : m_(m), c_(m), w_(m), k_(m - 1) {
    const double dc = 2.0 / (m - 1);
    for (int i = 0; i < m; ++i) {
      c_[i] = -1.0 + dc * i;
      w_[i] = (i == 0 || i == m - 1) ? 0.25 * dc : 0.5 * dc;
    }
    for (int i = 0; i + 1 < m; ++i) {
      const double cm = 0.5 * (c_[i] + c_[i + 1]);
      k_[i] = 0.5 * (1.0 - cm * cm) / dc;
    }
  }

  const std::vector<double>& grid() const { return c_; }

  std::vector<double> project(const std::vector<double>& u, double curv_scale,
                              std::vector<char>* active_io = nullptr) const {
    std::vector<double> v = u;
    std::vector<char> local;
    std::vector<char>& active = active_io ? *active_io : local;
    if (active.size() != static_cast<size_t>(m_)) active.assign(m_, 1);  // contact set
    std::vector<double> a(m_), b(m_), cc(m_), rhs(m_);
    bool ok = false;
    for (int pass = 0; pass < 600; ++pass) {
      // solve the PDE on inactive runs with contact boundary data
      int i = 0;
      while (i < m_) {
        if (active[i]) {
          v[i] = u[i];
          ++i;
          continue;
        }
        int j = i;
        while (j < m_ && !active[j]) ++j;  // inactive run [i, j)
        const int len = j - i;
        for (int t = 0; t < len; ++t) {
          const int g = i + t;
          const double kl = g > 0 ? k_[g - 1] : 0.0;
          const double kr = g + 1 < m_ ? k_[g] : 0.0;
          b[t] = kl + kr;
          a[t] = -kl;
          cc[t] = -kr;
          rhs[t] = curv_scale * w_[g];
          if (g > 0 && active[g - 1]) rhs[t] += kl * u[g - 1];
          if (g + 1 < m_ && active[g + 1]) rhs[t] += kr * u[g + 1];
        }
        // Thomas solve
        for (int t = 1; t < len; ++t) {
          const double f = a[t] / b[t - 1];
          b[t] -= f * cc[t - 1];
          rhs[t] -= f * rhs[t - 1];
        }
        v[i + len - 1] = rhs[len - 1] / b[len - 1];
        for (int t = len - 2; t >= 0; --t) v[i + t] = (rhs[t] - cc[t] * v[i + t + 1]) / b[t];
        i = j;
      }
      // update the active set from primal/dual feasibility
      bool changed = false;
      for (int g = 0; g < m_; ++g) {
        const double kl = g > 0 ? k_[g - 1] : 0.0;
        const double kr = g + 1 < m_ ? k_[g] : 0.0;
        double Kv = (kl + kr) * v[g];
        if (g > 0) Kv -= kl * v[g - 1];
        if (g + 1 < m_) Kv -= kr * v[g + 1];
        const double slack = curv_scale * w_[g] - Kv;
        if (active[g] && slack < -1e-14) {
          active[g] = 0;
          changed = true;
        } else if (!active[g] && v[g] > u[g] + 1e-14) {
          active[g] = 1;
          changed = true;
        }
      }
      if (!changed) {
        ok = true;
        break;
      }
    }
    if (!ok) throw std::runtime_error("RadialObstacle: active-set iteration did not settle");
    for (int g = 0; g < m_; ++g) v[g] = std::min(v[g], u[g]);
    return v;
  }

 private:
  int m_;
  std::vector<double> c_, w_, k_;
};

}  // namespace detail

// exact S^1-symmetric geodesic: in s = log|z|^2 the Legendre transform of
// psi_0 + u_t interpolates linearly in t
inline MetricPath geodesic_legendre(const SurfacePtr& s, const Potential& u0, const Potential& u1,
                                    int K, double curv_scale = 1.0, int ns = 16384,
                                    int npgrid = 8192) {
  if (s->kind != SurfaceKind::sphere)
    throw std::invalid_argument("geodesic_legendre: sphere surfaces only");
  if (!detail::is_zonal(u0) || !detail::is_zonal(u1))
    throw std::invalid_argument("geodesic_legendre: requires S^1-invariant (zonal) data");

  const auto c0 = s->sht->analyze(u0.values);
  const auto c1 = s->sht->analyze(u1.values);
  // fine s-grid; c = (1-e^s)/(1+e^s) puts s = log|z|^2
  const double S = 44.0;
  std::vector<double> sg(ns), f0(ns), f1(ns);
  for (int i = 0; i < ns; ++i) {
    const double sv = -S + 2.0 * S * i / (ns - 1);
    sg[i] = sv;
    const double c = (1.0 - std::exp(sv)) / (1.0 + std::exp(sv));
    const double psi0 = sv > 0 ? sv + std::log1p(std::exp(-sv)) : std::log1p(std::exp(sv));
    f0[i] = curv_scale * psi0 + s->sht->evaluate(c0, c, 0.0);
    f1[i] = curv_scale * psi0 + s->sht->evaluate(c1, c, 0.0);
  }
  detail::DiscreteConjugate phi0(sg, f0), phi1(sg, f1);

  std::vector<double> pg(npgrid);
  for (int i = 0; i < npgrid; ++i)
    pg[i] = curv_scale * (i + 0.5) / npgrid;  // interior of (0, scale)
  const std::vector<double> g0 = phi0.at_ascending(pg);
  const std::vector<double> g1 = phi1.at_ascending(pg);

  MetricPath path;
  path.surface = s;
  path.is_subgeodesic = true;
  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) / (K - 1);
    Eigen::VectorXd ut(s->num_nodes());
    std::vector<double> gt(npgrid);
    for (int i = 0; i < npgrid; ++i) gt[i] = (1.0 - t) * g0[i] + t * g1[i];
    detail::DiscreteConjugate phit(pg, gt);  // conjugate back
    for (int it = 0; it < s->n_theta; ++it) {  // ascending s along ascending c? no: s decreasing in c
      const double c = s->cos_theta[it];
      const double sv = std::log((1.0 - c) / (1.0 + c));
      const double psi0 = std::log(2.0 / (1.0 + c));
      const double val = phit.at(sv) - curv_scale * psi0;
      for (int jp = 0; jp < s->n_phi; ++jp) ut[it * s->n_phi + jp] = val;
    }
    path.times.push_back(t);
    path.samples.push_back(Potential{s, std::move(ut)});
  }
  // endpoints come from the double transform; keep them exact
  path.samples.front() = u0;
  path.samples.back() = u1;
  return path;
}

// general C0 geodesic as the upper envelope, via the rooftop representation
// u_t = sup_tau [ t tau + P(min(u0, u1 - tau)) ]. The sup over a fixed dense
// tau grid keeps each time slice an exact maximum of affine functions of t
// (so discrete t-convexity is exact); S^1-invariant sphere data is routed
// through a fine radial grid, general data through the 2-D obstacle solver.
inline MetricPath geodesic_envelope(const SurfacePtr& s, const Potential& u0, const Potential& u1,
                                    int K, int n_tau = 0, double tol = 1e-9,
                                    double curv_scale = 1.0) {
  require_same_surface(s, u0.surface);
  require_same_surface(s, u1.surface);
  const int nn = s->num_nodes();
  MetricPath path;
  path.surface = s;
  path.is_subgeodesic = true;

  const bool radial =
      s->kind == SurfaceKind::sphere && detail::is_zonal(u0) && detail::is_zonal(u1);

  if (radial) {
    const detail::RadialObstacle ro(4097);
    const auto& cg = ro.grid();
    const int M = static_cast<int>(cg.size());
    const auto c0 = s->sht->analyze(u0.values);
    const auto c1 = s->sht->analyze(u1.values);
    std::vector<double> u0r(M), u1r(M);
    for (int i = 0; i < M; ++i) {
      u0r[i] = s->sht->evaluate(c0, cg[i], 0.0);
      u1r[i] = s->sht->evaluate(c1, cg[i], 0.0);
    }
    double tmin = 1e300, tmax = -1e300;
    for (int i = 0; i < M; ++i) {
      tmin = std::min(tmin, u1r[i] - u0r[i]);
      tmax = std::max(tmax, u1r[i] - u0r[i]);
    }
    if (n_tau <= 0) {
      // the sup over the tau grid carries first-order kinks: resolve the
      // spread to ~2.5e-4
      n_tau = std::min(16385, std::max(2049, static_cast<int>((tmax - tmin) / 2.5e-4)));
    }
    // projections evaluated at the quadrature rings: rings x taus
    Eigen::MatrixXd pr(s->n_theta, n_tau);
    std::vector<double> taus(n_tau), roof(M);
    std::vector<char> active;  // PDAS contact set, warm-started along tau
    const double dc = cg[1] - cg[0];
    for (int a = 0; a < n_tau; ++a) {
      taus[a] = tmin + (tmax - tmin) * a / (n_tau - 1.0);
      for (int i = 0; i < M; ++i) roof[i] = std::min(u0r[i], u1r[i] - taus[a]);
      const auto p = ro.project(roof, curv_scale, &active);
      for (int r = 0; r < s->n_theta; ++r) {
        const double x = (s->cos_theta[r] + 1.0) / dc;
        const int i0 = std::min(M - 2, static_cast<int>(x));
        const double w = x - i0;
        pr(r, a) = (1.0 - w) * p[i0] + w * p[i0 + 1];
      }
    }
    for (int k = 0; k < K; ++k) {
      const double t = static_cast<double>(k) / (K - 1);
      Eigen::VectorXd ut(nn);
      for (int r = 0; r < s->n_theta; ++r) {
        double best = -1e300;
        for (int a = 0; a < n_tau; ++a) best = std::max(best, t * taus[a] + pr(r, a));
        for (int j = 0; j < s->n_phi; ++j) ut[r * s->n_phi + j] = best;
      }
      path.times.push_back(t);
      path.samples.push_back(Potential{s, std::move(ut)});
    }
    path.samples.front() = u0;
    path.samples.back() = u1;
    return path;
  }

  if (n_tau <= 0) n_tau = 321;
  const auto op = build_dirichlet_operator(s);
  const Eigen::VectorXd diffv = u1.values - u0.values;
  const double tmin = diffv.minCoeff(), tmax = diffv.maxCoeff();
  std::vector<double> taus(n_tau);
  Eigen::VectorXd warm = u0.values;
  std::vector<Eigen::VectorXd> projections(n_tau);
  for (int a = 0; a < n_tau; ++a) {
    const double tau = tmin + (tmax - tmin) * a / (n_tau - 1.0);
    taus[a] = tau;
    Potential roof{s, u0.values.cwiseMin((u1.values.array() - tau).matrix())};
    auto rep = project_psh_report(op, roof, tol, 40000, &warm, curv_scale);
    if (!rep.converged)
      throw std::runtime_error("geodesic_envelope: obstacle solve stalled at residual " +
                               std::to_string(rep.residual));
    warm = rep.result.values;
    projections[a] = std::move(rep.result.values);
  }

  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) / (K - 1);
    Eigen::VectorXd ut = Eigen::VectorXd::Constant(nn, -1e300);
    for (int a = 0; a < n_tau; ++a) {
      const double shift = t * taus[a];
      for (int i = 0; i < nn; ++i) ut[i] = std::max(ut[i], shift + projections[a][i]);
    }
    path.times.push_back(t);
    path.samples.push_back(Potential{s, std::move(ut)});
  }
  path.samples.front() = u0;
  path.samples.back() = u1;
  return path;
}

struct GeodesicOptions {
  int n_tau = 0;  // 0: per-route default (dense radial grid, coarser 2-D grid)
  double obstacle_tol = 1e-9;
  double affine_tol = 1e-4;  // E-chord test for the is_geodesic flag
};

inline MetricPath geodesic(const BundlePtr& b, const Potential& u0, const Potential& u1, int K,
                           GeodesicMethod method, const GeodesicOptions& opt = {}) {
  if (K < 2) throw std::invalid_argument("geodesic: need at least two time samples");
  const double scale = b->V();
  MetricPath path =
      method == GeodesicMethod::legendre
          ? geodesic_legendre(b->surface, u0, u1, K, scale)
          : geodesic_envelope(b->surface, u0, u1, K, opt.n_tau, opt.obstacle_tol, scale);
  // affinity of E along the path decides the geodesic flag
  const double e0 = energy_E(b, path.samples.front());
  const double e1 = energy_E(b, path.samples.back());
  double dev = 0.0;
  for (int k = 0; k < path.steps(); ++k) {
    const double chord = e0 + (e1 - e0) * path.times[k];
    dev = std::max(dev, std::abs(energy_E(b, path.samples[k]) - chord));
  }
  path.is_geodesic = dev < opt.affine_tol;
  return path;
}

// --- path diagnostics ----------------------------------------------------------

struct PathRow {
  double t;
  double E, J, I, L, F;
  double defect_max;      // sup over unmasked nodes of |c(u_t)|
  double masked_fraction; // quadrature mass where omega_t is degenerate
};

// Monge-Ampere defect density c(u_t) = (1/4)(u_tt - |dz u_t|^2 / (h rho_t))
// at an interior time sample, via centered differences in t and spectral
// derivatives in x; nodes with rho_t <= 1e-8 are masked
inline Eigen::VectorXd geodesic_defect(const SurfacePtr& s, const Potential& um,
                                       const Potential& u0, const Potential& up, double dt,
                                       std::vector<char>* mask_out = nullptr,
                                       double curv_scale = 1.0) {
  const Eigen::VectorXd udot = (up.values - um.values) / (2.0 * dt);
  const Eigen::VectorXd uddot = (up.values - 2.0 * u0.values + um.values) / (dt * dt);
  const Eigen::VectorXcd dz = dzbar(s, Potential{s, udot});
  const Density rho = ddc(s, u0);
  Eigen::VectorXd out(s->num_nodes());
  if (mask_out) mask_out->assign(s->num_nodes(), 0);
  for (int i = 0; i < s->num_nodes(); ++i) {
    const double rt = curv_scale + rho.values[i];
    if (rt <= 1e-8 * curv_scale) {
      out[i] = 0.0;
      if (mask_out) (*mask_out)[i] = 1;
      continue;
    }
    const double q = std::norm(dz[i]) / omega0_chart_coeff(s, i);
    out[i] = 0.25 * (uddot[i] - q / rt);
  }
  return out;
}

inline std::vector<PathRow> path_profile(const BundlePtr& b, const MetricPath& path) {
  if (path.steps() < 5) throw std::invalid_argument("path_profile: need at least 5 time samples");
  const auto& s = path.surface;
  std::vector<PathRow> rows(path.steps());
  for (int k = 0; k < path.steps(); ++k) {
    PathRow& r = rows[k];
    r.t = path.times[k];
    const auto& u = path.samples[k];
    r.E = energy_E(b, u);
    const auto ji = aubin_JI(b, u);
    r.J = ji.J;
    r.I = ji.I;
    r.L = functional_L(b, u);
    r.F = r.E - r.L;
    r.defect_max = 0.0;
    r.masked_fraction = 0.0;
    if (k > 0 && k + 1 < path.steps()) {
      const double dt = path.times[k + 1] - path.times[k];
      std::vector<char> mask;
      const Eigen::VectorXd c =
          geodesic_defect(s, path.samples[k - 1], u, path.samples[k + 1], dt, &mask, b->V());
      double masked = 0.0;
      for (int i = 0; i < s->num_nodes(); ++i) {
        if (mask[i])
          masked += s->quad[i];
        else
          r.defect_max = std::max(r.defect_max, std::abs(c[i]));
      }
      r.masked_fraction = masked;
    }
  }
  return rows;
}

// --- the vector field V_t -------------------------------------------------------
//
// In n = 1, omega_t(V_t, .) = dbar(d_t u) identifies V_t with the chart
// scalar (dzbar u_t') / g_t. The holomorphy residual int |dbar V|^2 omega_0
// is evaluated per hemisphere in the chart that is smooth there (z for the
// northern half, zeta = 1/z for the southern half); |dbar V|^2 is the
// chart-invariant pointwise norm.
struct VectorFieldResult {
  Eigen::VectorXcd field;      // chart coefficient in the node's hemisphere chart
  double residual = 0.0;       // int |dbar V|^2 omega_0 over unmasked nodes
  double masked_fraction = 0.0;
};



inline VectorFieldResult path_vector_field(const BundlePtr& b, const MetricPath& path,
                                           int t_index) {
  const double curv_scale = b->V();
  const auto& s = path.surface;
  if (t_index <= 0 || t_index + 1 >= path.steps())
    throw std::invalid_argument("path_vector_field: need an interior time index");
  const double dt = path.times[t_index + 1] - path.times[t_index];
  const Eigen::VectorXd udot =
      (path.samples[t_index + 1].values - path.samples[t_index - 1].values) / (2.0 * dt);
  const Density rho = ddc(s, path.samples[t_index]);

  VectorFieldResult res;
  const int nn = s->num_nodes();
  res.field.resize(nn);

  if (s->kind == SurfaceKind::torus) {
    const Eigen::VectorXcd D = dzbar(s, Potential{s, udot});
    double masked = 0.0;
    Eigen::VectorXcd V(nn);
    bool any = false;
    for (int i = 0; i < nn; ++i) {
      const double rt = curv_scale + rho.values[i];
      if (rt <= 1e-8 * curv_scale) {
        masked += s->quad[i];
        V[i] = 0.0;
        continue;
      }
      any = true;
      V[i] = D[i] / (omega0_chart_coeff(s, i) * rt);
    }
    if (!any) throw std::runtime_error("path_vector_field: omega_t degenerate everywhere");
    // dbar V by Fourier differentiation (V smooth periodic off the mask)
    const auto& fft = *s->fft;
    auto va = fft.analyze(Eigen::VectorXd(V.real())), vb = fft.analyze(Eigen::VectorXd(V.imag()));
    Eigen::VectorXcd coef(nn);
    for (int i = 0; i < nn; ++i) coef[i] = va[i] + std::complex<double>(0, 1) * vb[i];
    Eigen::VectorXcd ca = coef, cb = coef;
    fft.for_each_mode([&](int idx, int ja, int jb) {
      ca[idx] *= std::complex<double>(0.0, 2.0 * M_PI * ja);
      cb[idx] *= std::complex<double>(0.0, 2.0 * M_PI * jb);
    });
    const Eigen::VectorXcd da = fft.synthesize_complex(ca), db = fft.synthesize_complex(cb);
    const std::complex<double> den(0.0, 2.0 * s->tau.imag());
    double acc = 0.0;
    for (int i = 0; i < nn; ++i) {
      const double rt = curv_scale + rho.values[i];
      if (rt <= 1e-8 * curv_scale) continue;
      acc += s->quad[i] * std::norm((s->tau * da[i] - db[i]) / den);
    }
    res.field = std::move(V);
    res.residual = acc;
    res.masked_fraction = masked;
    return res;
  }

  // sphere: V = (dbar u') / (h rho_t) and its dbar from exact spectral chart
  // derivatives of the two scalars u' and rho_t, per hemisphere chart
  const auto du = SphereScalarDerivs::build(s, udot);
  const auto dr = SphereScalarDerivs::build(s, rho.values);
  double masked = 0.0, acc = 0.0;
  bool any = false;
  res.field.resize(nn);
  for (int i = 0; i < nn; ++i) {
    const double rt = curv_scale + rho.values[i];
    if (rt <= 1e-8 * curv_scale) {
      masked += s->quad[i];
      res.field[i] = 0.0;
      continue;
    }
    any = true;
    const double c = s->node_cos_theta(i), phi = s->node_phi(i);
    const bool south = c < 0.0;
    const double ce = south ? -c : c;
    const auto pu = sphere_chart_dbar(s, du, i, south);
    const auto pr = sphere_chart_dbar(s, dr, i, south);
    const double hchart = 0.25 * (1.0 + ce) * (1.0 + ce);
    const double r = std::sqrt((1.0 - ce) / (1.0 + ce));
    const double A = -r * (1.0 + ce) * (1.0 + ce);
    const std::complex<double> e = std::polar(1.0, south ? -phi : phi);
    const std::complex<double> dbar_h = 0.5 * e * A * 0.5 * (1.0 + ce);
    const double g = hchart * rt;
    const std::complex<double> dbar_g = hchart * pr.dbar + rt * dbar_h;
    const std::complex<double> V = pu.dbar / g;
    const std::complex<double> dbarV = (pu.dbar2 * g - pu.dbar * dbar_g) / (g * g);
    res.field[i] = V;
    acc += s->quad[i] * std::norm(dbarV);
  }
  if (!any) throw std::runtime_error("path_vector_field: omega_t degenerate everywhere");
  res.residual = acc;
  res.masked_fraction = masked;
  return res;
}

}  // namespace kmf
