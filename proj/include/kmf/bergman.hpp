#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmf/bundle.hpp"
#include "kmf/rng.hpp"

namespace kmf {

// Gram matrix of the section basis in the weight psi_0 + u, together with an
// orthonormalizing factor C (C^H G C = Id) and the induced on-grid
// orthonormal basis values.
struct GramState {
  BundlePtr setup;
  Potential u;
  Eigen::MatrixXcd G;
  Eigen::MatrixXcd C;
  Eigen::MatrixXcd on_basis;   // node x N values of the orthonormal basis
  Eigen::VectorXd measure;     // section_weight * e^{-u} at nodes (density)
  double logdet = 0.0;
};

inline GramState gram(const BundlePtr& b, const Potential& u) {
  require_same_surface(b->surface, u.surface);
  GramState st;
  st.setup = b;
  st.u = u;
  st.measure = b->section_weight().cwiseProduct((-u.values.array()).exp().matrix());
  const auto& W = b->surface->quad;
  if (b->is_sphere()) {
    const Eigen::VectorXd wts = W.cwiseProduct(st.measure);
    Eigen::MatrixXcd Bw = b->basis;
    for (int i = 0; i < Bw.rows(); ++i) Bw.row(i) *= std::sqrt(wts[i]);
    st.G = Bw.adjoint() * Bw;
    Eigen::LLT<Eigen::MatrixXcd> llt(st.G);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "gram: Gram matrix not positive definite (quadrature under-resolved)");
    Eigen::MatrixXcd L = llt.matrixL();
    st.logdet = 0.0;
    for (int i = 0; i < st.G.rows(); ++i) st.logdet += 2.0 * std::log(L(i, i).real());
    st.C = L.adjoint()
               .triangularView<Eigen::Upper>()
               .solve(Eigen::MatrixXcd::Identity(st.G.rows(), st.G.cols()));
    st.on_basis = b->basis * st.C;
  } else {
    const double g00 = W.dot(st.measure);
    if (!(g00 > 0.0)) throw std::runtime_error("gram: degenerate torus Gram entry");
    st.G = Eigen::MatrixXcd::Constant(1, 1, g00);
    st.logdet = std::log(g00);
    st.C = Eigen::MatrixXcd::Constant(1, 1, 1.0 / std::sqrt(g00));
    st.on_basis = Eigen::MatrixXcd::Constant(b->surface->num_nodes(), 1, st.C(0, 0));
  }
  return st;
}

// beta_u = (1/N) sum |s~_i|^2 e^{-(psi_0+u)}, a probability density
inline Density bergman_measure(const GramState& st) {
  const int nn = st.setup->surface->num_nodes();
  Eigen::VectorXd beta(nn);
  for (int i = 0; i < nn; ++i)
    beta[i] = st.on_basis.row(i).squaredNorm() * st.measure[i] / st.setup->N;
  return {st.setup->surface, std::move(beta)};
}

// section basis values at an arbitrary sphere chart point
inline Eigen::VectorXcd sphere_basis_at(const BundleSetup& b, std::complex<double> z) {
  const int m = b.m();
  Eigen::VectorXcd out(b.N);
  std::complex<double> zp = 1.0;
  for (int j = 0; j <= m; ++j) {
    out[j] = std::sqrt((m + 1) * binom(m, j)) * zp;
    zp *= z;
  }
  return out;
}

// K_u(x,y) = sum_i s~_i(y) conj(s~_i(x)) in the chart trivialization
inline std::complex<double> bergman_kernel(const GramState& st, std::complex<double> x,
                                           std::complex<double> y) {
  if (!st.setup->is_sphere()) return st.on_basis(0, 0) * std::conj(st.on_basis(0, 0));
  const Eigen::VectorXcd sx = (sphere_basis_at(*st.setup, x).transpose() * st.C).transpose();
  const Eigen::VectorXcd sy = (sphere_basis_at(*st.setup, y).transpose() * st.C).transpose();
  return sx.dot(sy);  // sum s~_i(y) conj(s~_i(x))
}

// Toeplitz operator T[f] in the psi_0-orthonormal basis
inline Eigen::MatrixXcd toeplitz_matrix(const BundlePtr& b, const Eigen::VectorXd& f) {
  if (!b->is_sphere()) {
    const double v =
        b->surface->quad.cwiseProduct(b->section_weight()).dot(f);
    return Eigen::MatrixXcd::Constant(1, 1, v);
  }
  const Eigen::VectorXd wts = b->surface->quad.cwiseProduct(b->section_weight()).cwiseProduct(f);
  Eigen::MatrixXcd Bw = b->basis;
  for (int i = 0; i < Bw.rows(); ++i) Bw.row(i) *= wts[i];
  return b->basis.adjoint() * Bw;
}

// Toeplitz operator of a symbol in the (psi_0 + u)-orthonormal basis
inline Eigen::MatrixXcd toeplitz_in_state(const GramState& st, const Eigen::VectorXd& f) {
  const Eigen::VectorXd wts =
      st.setup->surface->quad.cwiseProduct(st.measure).cwiseProduct(f);
  Eigen::MatrixXcd Sw = st.on_basis;
  for (int i = 0; i < Sw.rows(); ++i) Sw.row(i) *= wts[i];
  return st.on_basis.adjoint() * Sw;
}

// directional derivative of L at u: dL(u)[v] = int v beta_u
inline double dL_direction(const GramState& st, const Potential& v) {
  const Density beta = bergman_measure(st);
  return st.setup->surface->quad.dot(v.values.cwiseProduct(beta.values));
}

// exact derivative of the Bergman density along u + t v (total mass zero):
// R[v](x) = (1/N) int |K(x,y)|^2 e^{-psi(x)-psi(y)} v(y) - beta_u(x) v(x)
inline Density R_op(const GramState& st, const Potential& v) {
  const Density beta = bergman_measure(st);
  const Eigen::MatrixXcd T = toeplitz_in_state(st, v.values);
  const int nn = st.setup->surface->num_nodes();
  Eigen::VectorXd out(nn);
  for (int i = 0; i < nn; ++i) {
    const auto row = st.on_basis.row(i);
    const double quad_form = (row * T * row.adjoint())(0, 0).real();
    out[i] = quad_form * st.measure[i] / st.setup->N - beta.values[i] * v.values[i];
  }
  return {st.setup->surface, std::move(out)};
}

// second derivative of s -> L(u + s v): (1/N) (Tr T[v]^2 - Tr T[v^2]) <= 0,
// the affine-path specialization of the Toeplitz trace formula
inline double hessian_L_affine(const GramState& st, const Potential& v) {
  const Eigen::MatrixXcd T1 = toeplitz_in_state(st, v.values);
  const Eigen::MatrixXcd T2 = toeplitz_in_state(st, v.values.cwiseProduct(v.values));
  const double tr_T1sq = T1.squaredNorm();  // Tr(T1^2) for Hermitian T1
  const double tr_T2 = T2.trace().real();
  return (tr_T1sq - tr_T2) / st.setup->N;
}

// --- determinantal point process --------------------------------------------

struct SpherePoint {
  double c;    // cos(theta)
  double phi;
};

inline std::complex<double> sphere_chart(const SpherePoint& p) {
  return std::polar(std::sqrt((1.0 - p.c) / (1.0 + p.c)), p.phi);
}

// log of the unnormalized N-point density |det(s_i(x_j))|^2 e^{-sum psi},
// against omega_0^{otimes N}
inline double dpp_log_unnormalized(const BundlePtr& b, const Potential& u,
                                   const std::vector<SpherePoint>& pts) {
  if (static_cast<int>(pts.size()) != b->N)
    throw std::invalid_argument("dpp density needs exactly N points");
  const auto coef = b->surface->sht->analyze(u.values);
  const int m = b->m();
  Eigen::MatrixXcd A(b->N, b->N);
  double logw = 0.0;
  for (int j = 0; j < b->N; ++j) {
    const auto z = sphere_chart(pts[j]);
    A.col(j) = sphere_basis_at(*b, z);
    const double uval = b->surface->sht->evaluate(coef, pts[j].c, pts[j].phi);
    logw += m * std::log((1.0 + pts[j].c) / 2.0) - uval;  // log(rho_m e^{-u})
  }
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  const double scale = A.cwiseAbs().maxCoeff();
  double logdet2 = 0.0;
  for (int i = 0; i < b->N; ++i) {
    const double a = std::abs(lu.matrixLU()(i, i));
    if (a <= 1e-13 * scale) return -std::numeric_limits<double>::infinity();
    logdet2 += 2.0 * std::log(a);
  }
  return logdet2 + logw;
}

// closed-form log Z_N of the Coulomb-gas product form at u = 0:
// 1/Z_N = N^N binom(N-1,0)...binom(N-1,N-1)/N!
inline double dpp_closed_form_log_z(int N) {
  double lognfact = 0.0;
  for (int i = 2; i <= N; ++i) lognfact += std::log(static_cast<double>(i));
  double s = 0.0;
  for (int i = 0; i < N; ++i) s += std::log(binom(N - 1, i));
  return lognfact - N * std::log(static_cast<double>(N)) - s;
}

// --- Metropolis estimate of L ------------------------------------------------

struct McResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double acceptance = 0.0;
  int n_samples = 0;
  std::uint64_t seed = 0;
  bool mixing_ok = true;
};

// Metropolis chain on X^N targeting the psi_0 determinantal density;
// L is recovered from L(u) = -(1/N) log E[e^{-sum u(x_i)}]. Single-site
// moves with rank-one determinant updates; step size tuned during burn-in.
inline McResult mc_estimate_L(const BundlePtr& b, const Potential& u, int n_samples,
                              std::uint64_t seed) {
  if (!b->is_sphere()) throw std::invalid_argument("mc_estimate_L: sphere setup required");
  if (n_samples < 1000) throw std::invalid_argument("mc_estimate_L: need at least 10^3 samples");
  const int N = b->N;
  const int m = b->m();
  Rng rng(seed);
  const auto ucoef = b->surface->sht->analyze(u.values);

  auto weighted_basis = [&](const SpherePoint& p) -> Eigen::VectorXcd {
    return sphere_basis_at(*b, sphere_chart(p)) *
           std::pow((1.0 + p.c) / 2.0, 0.5 * m);  // sqrt(rho_m)
  };

  std::vector<SpherePoint> pts(N);
  Eigen::MatrixXcd A(N, N);
  auto init = [&]() {
    for (int j = 0; j < N; ++j) {
      pts[j] = {rng.uniform(-0.95, 0.95), rng.uniform(0.0, 2.0 * M_PI)};
      A.col(j) = weighted_basis(pts[j]);
    }
  };
  init();
  while (std::abs(A.partialPivLu().determinant()) < 1e-12) init();
  Eigen::MatrixXcd Ainv = A.inverse();

  double step = 0.4;
  long accepted = 0, attempted = 0;
  const int burn = std::max(100, n_samples / 10);
  std::vector<double> sample_log(n_samples);

  auto sweep = [&](bool tune) {
    for (int j = 0; j < N; ++j) {
      SpherePoint prop = pts[j];
      prop.c += step * rng.normal();
      while (prop.c > 1.0 || prop.c < -1.0) {
        if (prop.c > 1.0) prop.c = 2.0 - prop.c;
        if (prop.c < -1.0) prop.c = -2.0 - prop.c;
      }
      prop.phi = std::fmod(prop.phi + 2.0 * M_PI * step * rng.normal(), 2.0 * M_PI);
      if (prop.phi < 0.0) prop.phi += 2.0 * M_PI;
      const Eigen::VectorXcd a_new = weighted_basis(prop);
      const std::complex<double> r = (Ainv * a_new)(j);
      ++attempted;
      if (std::norm(r) > rng.uniform()) {
        // column replacement update of A^{-1}
        const Eigen::VectorXcd w = Ainv * (a_new - A.col(j));
        Ainv -= (w / (1.0 + w(j))) * Ainv.row(j);
        A.col(j) = a_new;
        pts[j] = prop;
        ++accepted;
      }
      if (tune && attempted % 50 == 0) {
        const double rate = static_cast<double>(accepted) / attempted;
        step *= std::exp(0.5 * (rate - 0.4));
        step = std::min(2.0, std::max(1e-3, step));
      }
    }
  };

  for (int it = 0; it < burn; ++it) sweep(true);
  accepted = 0;
  attempted = 0;
  for (int it = 0; it < n_samples; ++it) {
    sweep(false);
    if ((it + 1) % 512 == 0) Ainv = A.inverse();  // limit rank-one drift
    double su = 0.0;
    for (int j = 0; j < N; ++j) su += b->surface->sht->evaluate(ucoef, pts[j].c, pts[j].phi);
    sample_log[it] = -su;
  }

  // mean of e^{-sum u}, computed stably around the max exponent
  const double mx = *std::max_element(sample_log.begin(), sample_log.end());
  double mean = 0.0;
  for (double s : sample_log) mean += std::exp(s - mx);
  mean /= n_samples;

  McResult out;
  out.n_samples = n_samples;
  out.seed = seed;
  out.acceptance = static_cast<double>(accepted) / std::max(1L, attempted);
  out.mixing_ok = out.acceptance >= 0.1 && out.acceptance <= 0.9;
  out.estimate = -(mx + std::log(mean)) / N;

  const int B = 200;
  std::vector<double> boot(B);
  for (int bi = 0; bi < B; ++bi) {
    double bm = 0.0;
    for (int k = 0; k < n_samples; ++k)
      bm += std::exp(sample_log[rng.uniform_int(0, n_samples - 1)] - mx);
    boot[bi] = -(mx + std::log(bm / n_samples)) / N;
  }
  double bmean = 0.0, bvar = 0.0;
  for (double v : boot) bmean += v;
  bmean /= B;
  for (double v : boot) bvar += (v - bmean) * (v - bmean);
  out.stderr_ = std::sqrt(bvar / (B - 1));
  return out;
}

}  // namespace kmf
