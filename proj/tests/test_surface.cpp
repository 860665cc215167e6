#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "kmf/calculus.hpp"
#include "kmf/fields.hpp"
#include "kmf/mobius.hpp"
#include "kmf/surface.hpp"

using namespace kmf;

TEST_CASE("sphere quadrature basics") {
  auto s = build_sphere(32, 64);
  REQUIRE(s->quad.sum() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(s->quad.minCoeff() > 0.0);

  SECTION("unit area and vanishing odd moment") {
    REQUIRE(integrate(s, constant_potential(s, 1.0)) == Catch::Approx(1.0).margin(1e-12));
    Eigen::VectorXd ct(s->num_nodes());
    for (int i = 0; i < s->num_nodes(); ++i) ct[i] = s->node_cos_theta(i);
    REQUIRE(integrate(s, ct) == Catch::Approx(0.0).margin(1e-13));
  }

  SECTION("chart density test value") {
    // f = (1+|z|^2)^{-1} = (1+c)/2; the analytic value is exactly 1/2 and a
    // refined-grid quadrature oracle must agree
    Eigen::VectorXd f(s->num_nodes());
    for (int i = 0; i < s->num_nodes(); ++i)
      f[i] = 1.0 / (1.0 + std::norm(s->chart_point(i)));
    const double val = integrate(s, f);
    REQUIRE(val == Catch::Approx(0.5).margin(1e-12));

    auto fine = build_sphere(128, 256);
    Eigen::VectorXd ff(fine->num_nodes());
    for (int i = 0; i < fine->num_nodes(); ++i)
      ff[i] = 1.0 / (1.0 + std::norm(fine->chart_point(i)));
    REQUIRE(val == Catch::Approx(integrate(fine, ff)).margin(1e-12));
  }

  SECTION("smooth bump against refined-grid oracle") {
    auto f = zonal_bump(s, 0.3, 0.4, 1.0);
    auto fine = build_sphere(128, 256);
    auto ffine = zonal_bump(fine, 0.3, 0.4, 1.0);
    REQUIRE(integrate(s, f) == Catch::Approx(integrate(fine, ffine)).margin(1e-11));
  }

  SECTION("size minimums rejected") {
    REQUIRE_THROWS_AS(build_sphere(4, 64), std::invalid_argument);
    REQUIRE_THROWS_AS(build_sphere(32, 4), std::invalid_argument);
  }
}

TEST_CASE("torus quadrature basics") {
  auto s = build_torus({0.0, 1.0}, 32);
  REQUIRE(s->quad.sum() == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(integrate(s, constant_potential(s, 1.0)) == Catch::Approx(1.0).margin(1e-14));

  SECTION("lattice covers the fundamental domain") {
    // node (ia, ib) sits at (ia/n, ib/n) in lattice coordinates; spacing 1/n
    REQUIRE(s->num_nodes() == 32 * 32);
    REQUIRE(s->chart_point(0) == std::complex<double>(0.0, 0.0));
    auto z = s->chart_point(1);
    REQUIRE(std::abs(z - std::complex<double>(1.0 / 32, 0.0)) < 1e-15);
  }

  SECTION("Fourier transform of a constant has only the zero mode") {
    auto c = s->fft->analyze(Eigen::VectorXd::Constant(s->num_nodes(), 3.25));
    REQUIRE(std::abs(c[0] - 3.25) < 1e-13);
    c[0] = 0.0;
    REQUIRE(c.cwiseAbs().maxCoeff() < 1e-13);
  }

  SECTION("invalid parameters rejected") {
    REQUIRE_THROWS_AS(build_torus({0.0, -1.0}, 32), std::invalid_argument);
    REQUIRE_THROWS_AS(build_torus({0.0, 1.0}, 33), std::invalid_argument);
    REQUIRE_THROWS_AS(build_torus({0.0, 1.0}, 8), std::invalid_argument);
  }
}

TEST_CASE("spherical harmonic transform round trip and derivatives") {
  auto s = build_sphere(24, 48);
  Rng rng(7);
  auto u = random_bandlimited(s, rng, 10, 1.0);

  SECTION("analysis/synthesis round trip") {
    auto coef = s->sht->analyze(u.values);
    auto back = s->sht->synthesize(coef);
    REQUIRE((back - u.values).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("off-grid evaluation matches grid values") {
    auto coef = s->sht->analyze(u.values);
    for (int i : {3, 100, 501}) {
      const double v = s->sht->evaluate(coef, s->node_cos_theta(i), s->node_phi(i));
      REQUIRE(v == Catch::Approx(u.values[i]).margin(1e-11));
    }
  }

  SECTION("deriv_c against finite differences at interior points") {
    auto coef = s->sht->analyze(u.values);
    auto dc = s->sht->deriv_c(coef);
    const double h = 1e-5;
    for (int i : {200, 600}) {
      const double c = s->node_cos_theta(i), phi = s->node_phi(i);
      const double fd =
          (s->sht->evaluate(coef, c + h, phi) - s->sht->evaluate(coef, c - h, phi)) / (2 * h);
      REQUIRE(dc[i] == Catch::Approx(fd).margin(1e-5));
    }
  }
}

TEST_CASE("ddc spectral operator") {
  auto s = build_sphere(24, 48);

  SECTION("annihilates constants; integrates to zero") {
    auto d0 = ddc(s, constant_potential(s, 4.0));
    REQUIRE(d0.values.cwiseAbs().maxCoeff() < 1e-10);
    Rng rng(3);
    auto u = random_bandlimited(s, rng, 10, 1.0);
    REQUIRE(std::abs(ddc(s, u).total_mass) < 1e-12);
  }

  SECTION("first spherical harmonic eigenvalue relation") {
    // Y_10 = sqrt(3) c has dd^c Y = -l(l+1) Y omega_0 = -2 Y omega_0
    Eigen::VectorXd y(s->num_nodes());
    for (int i = 0; i < s->num_nodes(); ++i) y[i] = std::sqrt(3.0) * s->node_cos_theta(i);
    auto d = ddc(s, Potential{s, y});
    REQUIRE((d.values + 2.0 * y).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("torus eigenmode") {
    auto t = build_torus({0.25, 1.1}, 32);
    Eigen::VectorXd f(t->num_nodes());
    const int ja = 2, jb = -1;
    for (int i = 0; i < t->num_nodes(); ++i) {
      const int ia = i % 32, ib = i / 32;
      f[i] = std::cos(2.0 * M_PI * (ja * ia + jb * ib) / 32.0);
    }
    auto d = ddc(t, Potential{t, f});
    const double lam = -(M_PI / 1.1) * (std::pow(-1.0 - 2.0 * 0.25, 2) + 4.0 * 1.1 * 1.1);
    REQUIRE((d.values - lam * f).cwiseAbs().maxCoeff() < 1e-10 * std::abs(lam));
  }
}

TEST_CASE("dirichlet pairing") {
  auto s = build_sphere(24, 48);
  Rng rng(11);
  auto u = random_bandlimited(s, rng, 9, 1.0);
  auto v = random_bandlimited(s, rng, 9, 1.0);

  REQUIRE(dirichlet(s, constant_potential(s, 2.0), v) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(dirichlet(s, u, v) == Catch::Approx(dirichlet(s, v, u)).margin(1e-10));
  REQUIRE(dirichlet(s, u, u) >= 0.0);

  SECTION("gradient-density route agrees") {
    const double direct = dirichlet(s, u, u);
    const double via_grad = integrate(s, grad_density(s, u));
    REQUIRE(direct == Catch::Approx(via_grad).epsilon(1e-9));
  }

  SECTION("torus gradient route with skew modulus") {
    auto t = build_torus({0.5, 0.8660254037844386}, 32);
    Rng r2(5);
    auto w = random_bandlimited(t, r2, 6, 1.0);
    REQUIRE(dirichlet(t, w, w) ==
            Catch::Approx(integrate(t, grad_density(t, w))).epsilon(1e-9));
  }
}

TEST_CASE("torus green function") {
  auto s = build_torus({0.0, 1.0}, 64);
  const int pole = 64 * 32 + 16;  // generic node
  auto g = green_function(s, pole);

  SECTION("normalization: smooth and singular parts cancel in the mean") {
    // int w omega_0 = -pi sigma^2 / Im tau analytically; h is gauged so the
    // total integral vanishes. Check the grid mean of h matches the gauge and
    // the naive singular quadrature converges toward zero.
    const double h_mean = integrate(s, g.smooth);
    REQUIRE(h_mean == Catch::Approx(M_PI * g.sigma * g.sigma).margin(1e-10));
    double naive = 0.0;
    for (int i = 0; i < s->num_nodes(); ++i)
      if (i != pole) naive += s->quad[i] * g.value(i);
    REQUIRE(std::abs(naive) < 5e-3);
  }

  SECTION("log singularity split: remainder bounded and grid-stable near p") {
    // compare g - log|z-p|^2 at the same physical points on a refined grid
    auto s2 = build_torus({0.0, 1.0}, 128);
    auto g2 = green_function(s2, 128 * 64 + 32);  // same physical pole (0.25, 0.5)
    for (int da : {1, 2}) {
      const int i1 = 64 * 32 + 16 + da;
      const int i2 = 128 * 64 + 32 + 2 * da;
      REQUIRE(std::isfinite(g.regularized(i1)));
      REQUIRE(g.regularized(i1) == Catch::Approx(g2.regularized(i2)).margin(1e-6));
    }
    REQUIRE(std::isfinite(g.regularized(pole)));
  }

  SECTION("refinement stability away from the pole") {
    auto s2 = build_torus({0.0, 1.0}, 128);
    auto g2 = green_function(s2, 128 * 64 + 32);
    // compare at physical points (ia/64, ib/64) far from the pole
    for (int ia : {0, 10, 40}) {
      const int i1 = 5 * 64 + ia;
      const int i2 = 10 * 128 + 2 * ia;
      REQUIRE(g.value(i1) == Catch::Approx(g2.value(i2)).margin(1e-6));
    }
  }

  SECTION("distributional pairing against band-limited test functions") {
    Rng rng(17);
    auto phi = random_bandlimited(s, rng, 8, 1.0);
    const double lhs = g.pair_ddc(phi);
    const double rhs = phi.values[pole] - integrate(s, phi);
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-6));
  }

  SECTION("sphere surfaces rejected") {
    auto sp = build_sphere(16, 16);
    REQUIRE_THROWS_AS(green_function(sp, 0), std::invalid_argument);
  }
}

TEST_CASE("mobius pullback") {
  auto s = build_sphere(32, 64);
  Rng rng(23);
  auto u = random_bandlimited(s, rng, 8, 0.7);

  SECTION("identity map leaves u unchanged") {
    auto v = mobius_pullback(s, u, Mobius{});
    REQUIRE((v.values - u.values).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("rotations fix the reference metric") {
    // SU(2) elements act by isometries: pullback of u = 0 is 0
    const std::complex<double> a(0.8, 0.36), b(0.4, -0.26);
    Mobius R{a, b, -std::conj(b), std::conj(a)};  // unitary up to |det|
    auto v = mobius_pullback(s, constant_potential(s, 0.0), R);
    REQUIRE(v.values.cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("pullback of zero has unit mass and zero ddc total") {
    Mobius F{{1.3, 0.1}, {0.2, -0.3}, {0.0, 0.0}, {0.77, 0.0}};
    auto v = mobius_pullback(s, constant_potential(s, 0.0), F);
    auto dv = ddc(s, v);
    REQUIRE(std::abs(dv.total_mass) < 1e-8);
    // omega_v mass = 1: density 1 + ddc v against unit quadrature
    REQUIRE(integrate(s, Eigen::VectorXd(dv.values.array() + 1.0)) ==
            Catch::Approx(1.0).margin(1e-8));
  }

  SECTION("composition law under resampling") {
    Mobius F{{1.1, 0.0}, {0.3, 0.1}, {-0.05, 0.0}, {0.9, 0.0}};
    Mobius G{{0.95, 0.2}, {0.0, -0.25}, {0.1, 0.0}, {1.05, 0.0}};
    auto once = mobius_pullback(s, u, F.compose(G));
    auto twice = mobius_pullback(s, mobius_pullback(s, u, F), G);
    REQUIRE((once.values - twice.values).cwiseAbs().maxCoeff() < 1e-7);
  }

  SECTION("singular matrix rejected") {
    Mobius bad{{1.0, 0.0}, {2.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
    REQUIRE_THROWS_AS(mobius_pullback(s, u, bad), std::invalid_argument);
  }
}
