#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>

#include "generators.hpp"
#include "rp2ends/error.hpp"
#include "rp2ends/residue_spectrum.hpp"

using namespace rp2ends;
using rp2ends::testing::Gen;

namespace {

// Oracle: eigenvalues of the companion matrix of lambda^3 + p lambda + q.
Triple companion_roots(cplx r) {
  const double p = -3.0 * std::pow(2.0, -2.0 / 3.0) * std::pow(std::abs(r), 2.0 / 3.0);
  const double q = -r.imag();
  Mat3 c = Mat3::Zero();
  c(1, 0) = c(2, 1) = 1.0;
  c(0, 2) = -q;
  c(1, 2) = -p;
  Eigen::EigenSolver<Mat3> es(c);
  Triple out{};
  for (int i = 0; i < 3; ++i) out[i] = es.eigenvalues()[i].real();
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

Triple sorted_exp(const Triple& v) {
  Triple e{std::exp(kTwoPi * v[0]), std::exp(kTwoPi * v[1]), std::exp(kTwoPi * v[2])};
  std::sort(e.begin(), e.end(), std::greater<>());
  return e;
}

}  // namespace

TEST_SUITE("residue_spectrum") {
  TEST_CASE("roots of chi") {
    const Triple z = chi_roots(0.0);
    for (double v : z) CHECK(v == 0.0);
    const Triple q = chi_roots(cplx(0, 2));
    CHECK(q[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(q[1] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(q[2] == q[1]);
    const Triple h = chi_roots(2.0);
    CHECK(h[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(std::abs(h[1]) <= 1e-14);
    CHECK(h[2] == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-14));
  }

  TEST_CASE("roots of chi on the disk of radius 100") {
    Gen g(21);
    for (int n = 0; n < 10000; ++n) {
      const cplx r = g.disk(100.0);
      const Triple l = chi_roots(r);
      const Triple o = companion_roots(r);
      REQUIRE(l[0] >= l[1]);
      REQUIRE(l[1] >= l[2]);
      REQUIRE(std::abs(l[0] + l[1] + l[2]) <= 1e-12 * (1 + std::abs(r)));
      for (int i = 0; i < 3; ++i) {
        REQUIRE(std::abs(chi(r, l[i])) <= 1e-10 * (1 + std::abs(r)));
        REQUIRE(std::abs(l[i] - o[i]) <= 1e-5 * (1 + std::abs(o[i])));
      }
    }
  }

  TEST_CASE("discriminant") {
    CHECK(discriminant(0.0) == 0.0);
    CHECK(discriminant(2.0) == doctest::Approx(-1.0));
    CHECK(std::abs(discriminant(cplx(0, 2))) <= 1e-15);
    Gen g(22);
    for (int n = 0; n < 2000; ++n) {
      const cplx r = g.disk(50.0);
      REQUIRE(discriminant(r) <= 1e-12);
      const double im = r.imag();
      REQUIRE(std::abs(discriminant(cplx(0.0, im))) <= 1e-12 * (1 + im * im));
      const double eps = g.uniform(1e-3, 1.0);
      REQUIRE(discriminant(cplx(eps, im)) < 0.0);
      REQUIRE(discriminant(cplx(-eps, im)) < 0.0);
    }
  }

  TEST_CASE("classification pattern") {
    CHECK(classify_residue(0.0).kind == HolonomyKind::Parabolic);
    for (double v : classify_residue(0.0).eigenvalues) CHECK(v == 1.0);
    const HolonomyClass q = classify_residue(cplx(0, 2));
    CHECK(q.kind == HolonomyKind::QuasiHyperbolic);
    CHECK(q.eigenvalues[0] == doctest::Approx(std::exp(4 * kPi)));
    CHECK(q.eigenvalues[1] == doctest::Approx(std::exp(-2 * kPi)));
    CHECK(q.eigenvalues[2] == doctest::Approx(std::exp(-2 * kPi)));
    CHECK(classify_residue(cplx(-3, 4)).kind == HolonomyKind::Hyperbolic);
    CHECK(classify_residue(cplx(0, -3)).kind == HolonomyKind::QuasiHyperbolic);
  }

  TEST_CASE("class symmetry under R -> -conj R") {
    CHECK(class_symmetry_check(2.0));
    CHECK(class_symmetry_check(cplx(1, 1)));
    CHECK(class_symmetry_check(0.0));
    const Triple a = chi_roots(cplx(1, 1));
    const Triple b = chi_roots(cplx(-1, 1));
    for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
    Gen g(23);
    for (int n = 0; n < 1000; ++n) REQUIRE(class_symmetry_check(g.disk(20.0)));
  }

  TEST_CASE("xi branch") {
    CHECK(std::abs(xi_branch(cplx(0, 2)) - 1.0) <= 1e-15);
    CHECK(std::abs(xi_branch(2.0) - std::polar(1.0, kPi / 6)) <= 1e-15);
    CHECK(std::abs(xi_branch(-2.0) - std::polar(1.0, -kPi / 6)) <= 1e-15);
    CHECK_THROWS_AS(xi_branch(0.0), Error);
    Gen g(24);
    for (int n = 0; n < 2000; ++n) {
      const cplx r = g.disk(30.0);
      const cplx xi = xi_branch(r);
      REQUIRE(std::abs(xi * xi * xi - cplx(0, 2) / r) <= 1e-13 * std::abs(cplx(0, 2) / r));
      const double a = std::arg(xi);
      REQUIRE(std::abs(a) < kPi / 3);
      REQUIRE((a > 0) == (r.real() > 0));
    }
  }

  TEST_CASE("direction eigenvalues") {
    const DirectionEigenvalues d = direction_eigenvalues(2.0, kPi / 6);
    CHECK(d.mu[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d.mu[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d.mu[2] == doctest::Approx(-2.0).epsilon(1e-14));
    const Triple l = chi_roots(2.0);
    const Triple er = sorted_exp(d.rho);
    const Triple el = sorted_exp(l);
    for (int i = 0; i < 3; ++i) CHECK(er[i] == doctest::Approx(el[i]).epsilon(1e-10));
    CHECK_THROWS_AS(direction_eigenvalues(0.0, 1.0), Error);

    Gen g(25);
    for (int n = 0; n < 1000; ++n) {
      cplx r = g.disk(10.0);
      if (std::abs(r.real()) < 1e-3) r += 0.01;
      const double iota = g.uniform(0.01, kPi - 0.01);
      const DirectionEigenvalues e = direction_eigenvalues(r, iota);
      REQUIRE(std::abs(e.mu[0] + e.mu[1] + e.mu[2]) <= 1e-12);
      REQUIRE(std::abs(e.rho[0] + e.rho[1] + e.rho[2]) <= 1e-12);
      const double at = kPi / 3 - std::arg(xi_branch(r));
      if (at > 0 && at < kPi) {
        const DirectionEigenvalues s = direction_eigenvalues(r, at);
        REQUIRE(s.mu[0] == doctest::Approx(s.mu[1]).epsilon(1e-12));
        REQUIRE(s.mu[1] > s.mu[2]);
        const Triple a = sorted_exp(s.rho);
        const Triple b = sorted_exp(chi_roots(r));
        for (int i = 0; i < 3; ++i) REQUIRE(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("twist sign") {
    CHECK(twist_sign(1.0) == TwistSign::PlusInfinity);
    CHECK(twist_sign(cplx(-1, 5)) == TwistSign::MinusInfinity);
    CHECK(twist_sign(cplx(0, 3)) == TwistSign::Undefined);
    CHECK(twist_sign(0.0) == TwistSign::Undefined);
  }

  TEST_CASE("residues for a spectrum") {
    const auto q = residues_for_spectrum({2, -1, -1});
    REQUIRE(q.size() == 1);
    CHECK(std::abs(q[0] - cplx(0, 2)) <= 1e-12);
    const auto h = residues_for_spectrum({std::sqrt(3.0), 0, -std::sqrt(3.0)});
    REQUIRE(h.size() == 2);
    CHECK(std::abs(std::abs(h[0]) - 2.0) <= 1e-12);
    CHECK(std::abs(h[0] + h[1]) <= 1e-12);
    const auto z = residues_for_spectrum({0, 0, 0});
    REQUIRE(z.size() == 1);
    CHECK(std::abs(z[0]) == 0.0);
    CHECK_THROWS_AS(residues_for_spectrum({1, 1, 1}), Error);
  }

  TEST_CASE("residues round-trip through chi") {
    Gen g(26);
    for (int n = 0; n < 2000; ++n) {
      cplx r = g.disk(40.0);
      if (n % 5 == 0) r = cplx(0.0, r.imag());
      const auto back = residues_for_spectrum(chi_roots(r));
      REQUIRE(back.size() == (r.real() == 0.0 ? 1u : 2u));
      double best = 1e300;
      for (cplx b : back) {
        best = std::min(best, std::abs(b - r));
        REQUIRE(std::abs(b.real()) == doctest::Approx(std::abs(r.real())).epsilon(1e-6).scale(1.0));
      }
      REQUIRE(best <= 1e-8 * (1 + std::abs(r)));
    }
  }

  TEST_CASE("spectrum report invariants") {
    Gen g(27);
    for (int n = 0; n < 1000; ++n) {
      const cplx r = n == 0 ? cplx(0.0) : g.disk(20.0);
      const SpectrumReport s = spectrum_report(r);
      REQUIRE(std::abs(s.lambda[0] + s.lambda[1] + s.lambda[2]) <= 1e-12 * (1 + std::abs(r)));
      REQUIRE(s.alpha[0] * s.alpha[1] * s.alpha[2] == doctest::Approx(1.0).epsilon(1e-10));
      REQUIRE(s.discriminant <= 1e-12);
      REQUIRE(s.xi.has_value() == (r != 0.0));
    }
  }
}
