#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "kmf/bundle.hpp"
#include "kmf/functionals.hpp"

namespace kmf {

// Relative analytic torsion of the dbar-Laplacian on F = L + K_X between the
// metrics e^{-u} h_0 and h_0, through the exact anomaly polynomial
//   (deg K_X / 2 deg L) J(u) + N F(u).
// Absolute zeta determinants are never formed; the anomaly difference is the
// closed-form content.
struct TorsionRecord {
  double relative_torsion = 0.0;
  double j_coefficient = 0.0;  // deg K_X / (2 deg L)
  double j_value = 0.0;
  double f_value = 0.0;
  int n_sections = 0;

  double recompute() const { return j_coefficient * j_value + n_sections * f_value; }
};

inline TorsionRecord relative_torsion(const BundlePtr& b, const Potential& u) {
  TorsionRecord rec;
  const int deg_k = b->is_sphere() ? -2 : 0;
  rec.j_coefficient = static_cast<double>(deg_k) / (2.0 * b->V());
  rec.j_value = aubin_JI(b, u).J;
  rec.f_value = functional_F(b, u);
  rec.n_sections = b->N;
  rec.relative_torsion = rec.recompute();
  return rec;
}

// sharp determinant bound on O(m): the relative torsion is at most
// -(1/(2(m+2))) int du ^ d^c u, with equality exactly on the critical orbit
struct FangCheck {
  double lhs = 0.0;     // relative torsion of e^{-u} h_0^m
  double rhs = 0.0;     // -(1/(2(m+2))) int du ^ d^c u
  double margin = 0.0;  // rhs - lhs >= 0
  bool rhs_nonpositive = true;
};

inline FangCheck fang_check(const SurfacePtr& s, int m, const Potential& u) {
  if (m < 0) throw std::invalid_argument("fang_check: m must be nonnegative");
  auto b = make_sphere_bundle(s, m + 2);
  FangCheck out;
  const auto rec = relative_torsion(b, u);
  out.lhs = rec.relative_torsion;
  out.rhs = -rec.j_value / (m + 2);
  out.margin = out.rhs - out.lhs;
  out.rhs_nonpositive = out.rhs <= 1e-15;
  return out;
}

// large tensor power ladder: for each k the O(k) setup carries the weight
// k*u; the scaled relative torsion tau(k)/k approaches minus the relative
// entropy of omega_u against omega_0
struct LadderRow {
  int k = 0;
  double f_k = 0.0;             // F_{k omega_0}(k u)
  double scaled_torsion = 0.0;  // tau(k)/k
  bool gram_resolved = true;
};

struct LadderResult {
  std::vector<LadderRow> rows;
  double neg_entropy = 0.0;     // -S(u), the k -> infinity target
  double extrapolated = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
};

inline LadderResult entropy_ladder(const SurfacePtr& s, const Potential& u,
                                   const std::vector<int>& k_list) {
  LadderResult out;
  // -S for the unit-volume reference: (1/2) int log(omega_u/omega_0) omega_u
  const Density d = ddc(s, u);
  double S = 0.0;
  for (int i = 0; i < s->num_nodes(); ++i) {
    const double mu = 1.0 + d.values[i];
    if (!(mu > 0.0)) throw std::runtime_error("entropy_ladder: omega_u degenerate");
    S += 0.5 * s->quad[i] * mu * std::log(mu);
  }
  out.neg_entropy = -S;

  const double J = 0.5 * dirichlet(s, u, u);
  for (int k : k_list) {
    if (k < 1 || k > 16) throw std::invalid_argument("entropy_ladder: k must lie in [1,16]");
    LadderRow row;
    row.k = k;
    if (k == 1) {
      // N = dim H^0(O(-1)) = 0: the section term is absent and the anomaly
      // reduces to -J(k u)/k = -k J(u)
      row.f_k = std::numeric_limits<double>::quiet_NaN();
      row.scaled_torsion = -J;
    } else {
      try {
        auto bk = make_sphere_bundle(s, k);
        Potential ku{s, static_cast<double>(k) * u.values};
        const double fk = functional_F(bk, ku);
        row.f_k = fk;
        // tau(k) = -(1/k) J(ku) + N_k F_k(ku) = -k J + (k-1) F_k
        row.scaled_torsion = (-static_cast<double>(k) * J + (k - 1.0) * fk) / k;
      } catch (const std::exception&) {
        row.gram_resolved = false;
      }
    }
    out.rows.push_back(row);
  }

  // Richardson extrapolation in x = 1/k from the largest resolved rows
  // (two-point linear, upgraded to three-point polynomial when available)
  std::vector<const LadderRow*> good;
  for (const auto& r : out.rows)
    if (r.gram_resolved && r.k >= 2) good.push_back(&r);
  const int g = static_cast<int>(good.size());
  if (g >= 2) {
    const int use = std::min(3, g);
    std::vector<double> x(use), f(use);
    for (int i = 0; i < use; ++i) {
      x[i] = 1.0 / good[g - use + i]->k;
      f[i] = good[g - use + i]->scaled_torsion;
    }
    double acc = 0.0;
    for (int i = 0; i < use; ++i) {
      double li = 1.0;
      for (int j = 0; j < use; ++j)
        if (j != i) li *= (0.0 - x[j]) / (x[i] - x[j]);
      acc += f[i] * li;
    }
    out.extrapolated = acc;
    out.gap = std::abs(out.extrapolated - out.neg_entropy);
  }
  return out;
}

}  // namespace kmf
