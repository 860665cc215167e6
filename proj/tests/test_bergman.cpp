#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <functional>

#include "kmf/bergman.hpp"
#include "kmf/fields.hpp"
#include "kmf/functionals.hpp"
#include "kmf/gauss_legendre.hpp"
#include "kmf/hormander.hpp"

using namespace kmf;

namespace {

// independent oracle: for zonal u the Gram is diagonal with
// G_ii = c_i^2 * (1/2) int (1-c)^i (1+c)^{m-i} 2^{-m} e^{-u(c)} dc,
// evaluated by high-order 1-D Gauss-Legendre quadrature after the azimuthal
// integral is done analytically
Eigen::VectorXd zonal_gram_diagonal_oracle(int m, const std::function<double(double)>& u) {
  std::vector<double> nodes, weights;
  gauss_legendre(512, nodes, weights);
  Eigen::VectorXd diag(m + 1);
  for (int i = 0; i <= m; ++i) {
    double acc = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      const double c = nodes[k];
      acc += 0.5 * weights[k] * std::pow(1.0 - c, i) * std::pow(1.0 + c, m - i) *
             std::pow(2.0, -m) * std::exp(-u(c));
    }
    diag[i] = (m + 1) * binom(m, i) * acc;
  }
  return diag;
}

}  // namespace

TEST_CASE("gram matrix") {
  auto s = build_sphere(32, 64);

  SECTION("u = 0 gives the identity") {
    for (int deg : {2, 4, 7}) {
      auto b = make_sphere_bundle(s, deg);
      auto st = gram(b, constant_potential(s, 0.0));
      REQUIRE((st.G - Eigen::MatrixXcd::Identity(b->N, b->N)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  SECTION("constants scale the Gram") {
    auto b = make_sphere_bundle(s, 4);
    auto st = gram(b, constant_potential(s, 0.7));
    REQUIRE((st.G - std::exp(-0.7) * Eigen::MatrixXcd::Identity(b->N, b->N)).cwiseAbs().maxCoeff() <
            1e-9);
  }

  SECTION("zonal m = 2 against the radial quadrature oracle") {
    auto b = make_sphere_bundle(s, 4);
    auto uf = [](double c) { return 0.4 * std::exp(-(c - 0.2) * (c - 0.2) / 0.3); };
    Eigen::VectorXd uv(s->num_nodes());
    for (int i = 0; i < s->num_nodes(); ++i) uv[i] = uf(s->node_cos_theta(i));
    auto st = gram(b, Potential{s, uv});
    auto diag = zonal_gram_diagonal_oracle(2, uf);
    for (int i = 0; i <= 2; ++i)
      REQUIRE(st.G(i, i).real() == Catch::Approx(diag[i]).epsilon(1e-10));
    REQUIRE(std::abs(st.G(0, 1)) < 1e-12);
    REQUIRE(std::abs(st.G(0, 2)) < 1e-12);
  }

  SECTION("state invariants: hermitian, positive, orthonormalized") {
    auto b = make_sphere_bundle(s, 5);
    Rng rng(41);
    auto u = random_bandlimited(s, rng, 8, 0.8);
    auto st = gram(b, u);
    REQUIRE((st.G - st.G.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd wts = s->quad.cwiseProduct(st.measure);
    Eigen::MatrixXcd Sw = st.on_basis;
    for (int i = 0; i < Sw.rows(); ++i) Sw.row(i) *= wts[i];
    Eigen::MatrixXcd I = st.on_basis.adjoint() * Sw;
    REQUIRE((I - Eigen::MatrixXcd::Identity(b->N, b->N)).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(functional_L(b, u) == Catch::Approx(-st.logdet / b->N).margin(1e-13));
  }
}

TEST_CASE("bergman measure") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 5);
  Rng rng(5);

  SECTION("probability density for every u") {
    for (int k = 0; k < 5; ++k) {
      auto u = random_bandlimited(s, rng, 9, 1.0);
      auto beta = bergman_measure(gram(b, u));
      REQUIRE(beta.total_mass == Catch::Approx(1.0).margin(1e-9));
      REQUIRE(beta.values.minCoeff() > 0.0);
    }
  }

  SECTION("u = 0 reproduces omega_0") {
    auto beta = bergman_measure(gram(b, constant_potential(s, 0.0)));
    REQUIRE((beta.values.array() - 1.0).abs().maxCoeff() < 1e-8);
  }

  SECTION("torus density is normalized e^{g_p - u}") {
    auto t = build_torus({0.0, 1.0}, 32);
    auto bt = make_torus_bundle(t, 5 * 32 + 11);
    auto u = random_bandlimited(t, rng, 5, 0.5);
    auto beta = bergman_measure(gram(bt, u));
    Eigen::VectorXd expw(t->num_nodes());
    for (int i = 0; i < t->num_nodes(); ++i)
      expw[i] = bt->green->exp_value(i) * std::exp(-u.values[i]);
    expw /= integrate(t, expw);
    REQUIRE((beta.values - expw).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(beta.values[bt->marked_point] == 0.0);
  }
}

TEST_CASE("bergman kernel") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 4);
  Rng rng(19);
  auto u = random_bandlimited(s, rng, 8, 0.6);
  auto st = gram(b, u);
  auto beta = bergman_measure(st);

  SECTION("diagonal matches N beta") {
    for (int idx : {10, 500, 1500}) {
      const auto z = s->chart_point(idx);
      const double Kxx = bergman_kernel(st, z, z).real();
      const double psi_factor = b->rho_m[idx] * std::exp(-u.values[idx]);
      REQUIRE(Kxx * psi_factor == Catch::Approx(b->N * beta.values[idx]).epsilon(1e-10));
    }
  }

  SECTION("hermitian symmetry") {
    const auto x = s->chart_point(77), y = s->chart_point(901);
    REQUIRE(std::abs(bergman_kernel(st, x, y) - std::conj(bergman_kernel(st, y, x))) < 1e-12);
  }

  SECTION("reproducing identity at random points") {
    for (int k = 0; k < 20; ++k) {
      const int idx = rng.uniform_int(0, s->num_nodes() - 1);
      const auto x = s->chart_point(idx);
      const double ex = b->rho_m[idx] * std::exp(-u.values[idx]);
      double acc = 0.0;
      for (int i = 0; i < s->num_nodes(); ++i) {
        const double ey = b->rho_m[i] * std::exp(-u.values[i]);
        acc += s->quad[i] * std::norm(bergman_kernel(st, x, s->chart_point(i))) * ex * ey;
      }
      REQUIRE(acc == Catch::Approx(b->N * beta.values[idx]).margin(1e-7));
    }
  }
}

TEST_CASE("toeplitz operators") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 5);
  Rng rng(29);
  auto u = random_bandlimited(s, rng, 8, 0.7);

  SECTION("unit symbol") {
    auto T = toeplitz_matrix(b, Eigen::VectorXd::Ones(s->num_nodes()));
    REQUIRE((T - Eigen::MatrixXcd::Identity(b->N, b->N)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("determinant route to L") {
    auto T = toeplitz_matrix(b, (-u.values.array()).exp());
    const double logdet = std::log(T.partialPivLu().determinant().real());
    REQUIRE(-logdet / b->N == Catch::Approx(functional_L(b, u)).margin(1e-10));
  }

  SECTION("trace identity") {
    Rng r2(31);
    auto f = random_bandlimited(s, r2, 6, 1.0);
    auto T = toeplitz_matrix(b, f.values);
    auto beta0 = bergman_measure(gram(b, constant_potential(s, 0.0)));
    const double rhs = b->N * s->quad.dot(f.values.cwiseProduct(beta0.values));
    REQUIRE(T.trace().real() == Catch::Approx(rhs).margin(1e-9));
  }
}

TEST_CASE("derivatives of L") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 5);
  Rng rng(37);
  auto u = random_bandlimited(s, rng, 8, 0.6);
  auto v = random_bandlimited(s, rng, 8, 1.0);
  auto st = gram(b, u);

  SECTION("first derivative with observed first-order convergence") {
    const double dl = dL_direction(st, v);
    auto fd = [&](double t) {
      Potential ut{s, u.values + t * v.values};
      return (functional_L(b, ut) - functional_L(b, u)) / t;
    };
    const double e1 = std::abs(fd(1e-3) - dl);
    const double e2 = std::abs(fd(5e-4) - dl);
    REQUIRE(e2 < 0.65 * e1);  // first order in t
    REQUIRE(dl == Catch::Approx(fd(1e-6)).margin(1e-6));
  }

  SECTION("R operator: mass zero, R[1] = 0, sup bound") {
    auto r1 = R_op(st, constant_potential(s, 1.0));
    REQUIRE(r1.values.cwiseAbs().maxCoeff() < 1e-12);
    auto rv = R_op(st, v);
    REQUIRE(std::abs(rv.total_mass) < 1e-12);
    auto beta = bergman_measure(st);
    REQUIRE(rv.values.cwiseAbs().maxCoeff() <=
            2.0 * v.values.cwiseAbs().maxCoeff() * beta.values.maxCoeff() + 1e-12);
  }

  SECTION("R operator against centered finite differences of beta") {
    const double t = 1e-4;
    auto bp = bergman_measure(gram(b, Potential{s, u.values + t * v.values}));
    auto bm = bergman_measure(gram(b, Potential{s, u.values - t * v.values}));
    const Eigen::VectorXd fd = (bp.values - bm.values) / (2.0 * t);
    auto rv = R_op(st, v);
    REQUIRE((rv.values - fd).cwiseAbs().maxCoeff() < 1e-6);
  }

  SECTION("affine hessian: constants, sign, finite differences") {
    REQUIRE(hessian_L_affine(st, constant_potential(s, 3.0)) == Catch::Approx(0.0).margin(1e-12));
    const double h = hessian_L_affine(st, v);
    REQUIRE(h <= 1e-12);
    const double t = 1e-3;
    const double fd = (functional_L(b, Potential{s, u.values + t * v.values}) -
                       2.0 * functional_L(b, u) +
                       functional_L(b, Potential{s, u.values - t * v.values})) /
                      (t * t);
    REQUIRE(h == Catch::Approx(fd).margin(1e-6));
    for (int k = 0; k < 10; ++k) {
      auto w = random_bandlimited(s, rng, 7, 1.0);
      REQUIRE(hessian_L_affine(st, w) <= 1e-12);
    }
  }
}

TEST_CASE("determinantal point process") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 4);  // N = 3
  auto u0 = constant_potential(s, 0.0);

  SECTION("coincident points have zero density") {
    std::vector<SpherePoint> pts{{0.3, 1.0}, {0.3, 1.0}, {-0.5, 2.0}};
    REQUIRE(dpp_log_unnormalized(b, u0, pts) == -std::numeric_limits<double>::infinity());
  }

  SECTION("permutation invariance") {
    std::vector<SpherePoint> pts{{0.3, 1.0}, {-0.2, 4.1}, {-0.5, 2.0}};
    std::vector<SpherePoint> perm{{-0.5, 2.0}, {0.3, 1.0}, {-0.2, 4.1}};
    REQUIRE(dpp_log_unnormalized(b, u0, pts) ==
            Catch::Approx(dpp_log_unnormalized(b, u0, perm)).margin(1e-12));
  }

  SECTION("closed-form Z against the Coulomb product form") {
    // at u = 0 the normalized density |det|^2 e^{-sum psi} / N! equals
    // prod ||x_i - x_j||^2 / Z_N on the diameter-one sphere
    Rng rng(43);
    const double lognfact = std::log(6.0);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<SpherePoint> pts;
      for (int j = 0; j < 3; ++j) pts.push_back({rng.uniform(-0.99, 0.99), rng.uniform(0.0, 6.28)});
      const double lhs = dpp_log_unnormalized(b, u0, pts) - lognfact;
      double rhs = -dpp_closed_form_log_z(3);
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          const auto zi = sphere_chart(pts[i]), zj = sphere_chart(pts[j]);
          rhs += std::log(std::norm(zi - zj) / ((1.0 + std::norm(zi)) * (1.0 + std::norm(zj))));
        }
      REQUIRE(lhs == Catch::Approx(rhs).margin(1e-10));
    }
  }
}

TEST_CASE("monte carlo estimate of L") {
  auto s = build_sphere(24, 48);
  auto b = make_sphere_bundle(s, 4);

  SECTION("constant symbol is exact") {
    auto r = mc_estimate_L(b, constant_potential(s, 0.45), 1000, 11);
    REQUIRE(r.estimate == Catch::Approx(0.45).margin(1e-12));
    REQUIRE(r.stderr_ < 1e-12);
  }

  SECTION("zero potential") {
    auto r = mc_estimate_L(b, constant_potential(s, 0.0), 2000, 12);
    REQUIRE(std::abs(r.estimate) < std::max(3.0 * r.stderr_, 1e-3));
  }

  SECTION("random potential within three sigma of the Gram value") {
    Rng rng(53);
    auto u = random_bandlimited(s, rng, 6, 0.5);
    auto r = mc_estimate_L(b, u, 6000, 13);
    REQUIRE(r.mixing_ok);
    REQUIRE(std::abs(r.estimate - functional_L(b, u)) < 3.0 * r.stderr_);
    auto r2 = mc_estimate_L(b, u, 6000, 13);  // determinism given the seed
    REQUIRE(r.estimate == r2.estimate);
    REQUIRE(r.stderr_ == r2.stderr_);
  }
}

TEST_CASE("hormander minimal solution") {
  auto s = build_sphere(32, 64);
  auto b = make_sphere_bundle(s, 4);
  Rng rng(61);
  auto u = scale_to_psh(s, random_bandlimited(s, rng, 7, 1.0), b->V(), 0.2);

  SECTION("zero data") {
    const auto fam = detail::section_family(b->m(), 2);
    auto r = dbar_minimal_from_family(b, u, Eigen::VectorXcd::Zero(fam.size()), 2);
    REQUIRE(r.norm_alpha2 == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(r.norm_g2 == Catch::Approx(0.0).margin(1e-14));
  }

  SECTION("holomorphic quotient data attains equality") {
    Eigen::VectorXcd h(b->m() + 1);
    h << std::complex<double>(0.4, 0.1), std::complex<double>(-0.3, 0.0),
        std::complex<double>(0.15, -0.2);
    auto r = dbar_minimal_holomorphic_source(b, u, h);
    REQUIRE(r.hol_projection < 1e-9);
    REQUIRE(r.norm_alpha2 == Catch::Approx(r.norm_g2).epsilon(1e-6));
  }

  SECTION("generic data gives a strict gap, stable under doubled truncation") {
    const auto fam = detail::section_family(b->m(), 2);
    Eigen::VectorXcd beta = Eigen::VectorXcd::Zero(fam.size());
    Rng r2(67);
    for (Eigen::Index k = 0; k < beta.size(); ++k)
      beta[k] = 0.3 * std::complex<double>(r2.normal(), r2.normal());
    auto ra = dbar_minimal_from_family(b, u, beta, 2);
    REQUIRE(ra.norm_alpha2 < ra.norm_g2);
    REQUIRE(ra.norm_g2 - ra.norm_alpha2 > 1e-3);
    auto rb = dbar_minimal_from_grid(b, u, ra.g, 4);
    REQUIRE(rb.fit_residual < 1e-8);
    REQUIRE(rb.norm_alpha2 == Catch::Approx(ra.norm_alpha2).epsilon(1e-6));
  }
}
