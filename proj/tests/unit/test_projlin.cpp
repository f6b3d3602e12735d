#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "rp2ends/error.hpp"
#include "rp2ends/projlin.hpp"

using namespace rp2ends;
using rp2ends::testing::Gen;

namespace {

Mat3 diag(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

bool same_point(const ProjPoint& a, const ProjPoint& b, double tol) { return chart_distance(a, b) <= tol; }

}  // namespace

TEST_SUITE("projlin") {
  TEST_CASE("project normalises and fixes the sign") {
    CHECK(same_point(project(Vec3(2, 0, 0)), project(Vec3(1, 0, 0)), 0.0));
    const ProjPoint p = project(Vec3(0, 0, -5));
    CHECK(p[2] == doctest::Approx(1.0));
    CHECK(p[0] == 0.0);
    const ProjPoint q = project(Vec3(1, 1, 1));
    for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK_THROWS_AS(project(Vec3(0, 0, 1e-301)), Error);
  }

  TEST_CASE("project is invariant under scaling") {
    Gen g(11);
    for (int n = 0; n < 1000; ++n) {
      const Vec3 v = g.vector();
      const double c = g.scale();
      const ProjPoint a = project(v);
      const ProjPoint b = project(c * v);
      for (int i = 0; i < 3; ++i) REQUIRE(a[i] == doctest::Approx(b[i]).epsilon(1e-13).scale(1.0));
      REQUIRE(a.coords().norm() == doctest::Approx(1.0).epsilon(1e-15));
    }
  }

  TEST_CASE("twist matrix") {
    CHECK(twist_matrix({0, 0}).matrix().isIdentity(0.0));
    const Mat3 m10 = twist_matrix({1, 0}).matrix();
    CHECK(m10.isApprox(diag(std::exp(-1.0), 1.0, std::exp(1.0)), 1e-15));
    const Mat3 m01 = twist_matrix({0, 1}).matrix();
    CHECK(m01.isApprox(diag(std::exp(-1.0), std::exp(2.0), std::exp(-1.0)), 1e-15));
    CHECK(m01.determinant() == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("twist matrices commute with diagonal matrices") {
    Gen g(12);
    for (int n = 0; n < 200; ++n) {
      const Mat3 m = twist_matrix({g.uniform(-3, 3), g.uniform(-3, 3)}).matrix();
      const Mat3 d = diag(g.normal(), g.normal(), g.normal());
      REQUIRE((m * d - d * m).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("unimodular matrices reject det far from 1") {
    CHECK_THROWS_AS(UnimodularMatrix(diag(2, 1, 1)), Error);
    CHECK_NOTHROW(UnimodularMatrix(diag(2, 1, 0.5)));
    CHECK_NOTHROW(UnimodularMatrix(diag(2, 1, 0.5 * (1 + 1e-10))));
  }

  TEST_CASE("classification of normal forms") {
    const double a = std::exp(kTwoPi * std::sqrt(3.0));
    const HolonomyClass h = classify_matrix(UnimodularMatrix(diag(1.0 / a, a, 1.0)));
    CHECK(h.kind == HolonomyKind::Hyperbolic);
    CHECK(h.eigenvalues[0] == doctest::Approx(a).epsilon(1e-12));
    CHECK(h.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.eigenvalues[2] == doctest::Approx(1.0 / a).epsilon(1e-12));

    Mat3 jordan = Mat3::Identity();
    jordan(0, 1) = jordan(1, 2) = jordan(0, 2) = 1.0;
    CHECK(classify_matrix(UnimodularMatrix(jordan)).kind == HolonomyKind::Parabolic);

    Mat3 qh = diag(4, 4, 1.0 / 16.0);
    qh(0, 1) = 1.0;
    const HolonomyClass c = classify_matrix(UnimodularMatrix(qh));
    CHECK(c.kind == HolonomyKind::QuasiHyperbolic);
    CHECK(c.eigenvalues[0] == doctest::Approx(4.0));
    CHECK(c.eigenvalues[1] == doctest::Approx(4.0));
  }

  TEST_CASE("classification refuses what it cannot decide") {
    CHECK_THROWS_AS(classify_matrix(UnimodularMatrix(diag(-2, -0.5, 1))), Error);
    // repeated but diagonalisable: neither normal form
    try {
      classify_matrix(UnimodularMatrix(diag(2, 2, 0.25)));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedHolonomy);
    }
    // gap inside [tol, 10 tol]
    const double e = 5e-7;
    try {
      classify_matrix(UnimodularMatrix(diag(2 * (1 + e), 2, 1.0 / (4 * (1 + e)))));
      FAIL("expected an error");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::NumericallyAmbiguous);
    }
  }

  TEST_CASE("classification is conjugation invariant") {
    Gen g(13);
    for (int n = 0; n < 300; ++n) {
      Mat3 m;
      switch (n % 3) {
        case 0: {
          const double a = g.uniform(0.3, 3.0);
          const double b = g.uniform(-2.0, -0.3);
          m = diag(std::exp(a), std::exp(b), std::exp(-a - b));
          break;
        }
        case 1: {
          const double a = g.uniform(0.2, 2.0);
          m = diag(std::exp(a), std::exp(a), std::exp(-2 * a));
          m(0, 1) = g.uniform(0.5, 2.0);
          break;
        }
        default:
          m = Mat3::Identity();
          m(0, 1) = g.uniform(0.5, 2.0);
          m(1, 2) = g.uniform(0.5, 2.0);
      }
      const Mat3 q = g.conjugator(1e3);
      const HolonomyClass c0 = classify_matrix(UnimodularMatrix(m));
      const HolonomyClass c1 = classify_matrix(UnimodularMatrix(q * m * q.inverse()));
      REQUIRE(c0.kind == c1.kind);
      for (int i = 0; i < 3; ++i) REQUIRE(c1.eigenvalues[i] == doctest::Approx(c0.eigenvalues[i]).epsilon(1e-8));
      REQUIRE(c1.eigenvalues[0] * c1.eigenvalues[1] * c1.eigenvalues[2] == doctest::Approx(1.0).epsilon(1e-9));

      const auto f0 = fixed_points(UnimodularMatrix(m));
      const auto f1 = fixed_points(UnimodularMatrix(q * m * q.inverse()));
      REQUIRE(f0.size() == f1.size());
      for (std::size_t i = 0; i < f0.size(); ++i) {
        REQUIRE(f0[i].stability == f1[i].stability);
        REQUIRE(same_point(f1[i].point, project(q * f0[i].point.coords()), 1e-6));
      }
    }
  }

  TEST_CASE("fixed points and stability") {
    const auto h = fixed_points(UnimodularMatrix(diag(4, 1, 0.25)));
    REQUIRE(h.size() == 3);
    CHECK(same_point(h[0].point, project(Vec3(1, 0, 0)), 1e-14));
    CHECK(h[0].stability == Stability::Attracting);
    CHECK(same_point(h[1].point, project(Vec3(0, 1, 0)), 1e-14));
    CHECK(h[1].stability == Stability::Saddle);
    CHECK(same_point(h[2].point, project(Vec3(0, 0, 1)), 1e-14));
    CHECK(h[2].stability == Stability::Repelling);

    Mat3 jordan = Mat3::Identity();
    jordan(0, 1) = jordan(1, 2) = 1.0;
    const auto p = fixed_points(UnimodularMatrix(jordan));
    REQUIRE(p.size() == 1);
    CHECK(same_point(p[0].point, project(Vec3(1, 0, 0)), 1e-12));
    CHECK(p[0].stability == Stability::Parabolic);

    Mat3 qh = diag(4, 4, 1.0 / 16.0);
    qh(0, 1) = 1.0;
    CHECK(fixed_points(UnimodularMatrix(qh)).size() == 2);
  }

  TEST_CASE("principal triangle") {
    const PrincipalTriangle t = principal_triangle(UnimodularMatrix(diag(4, 1, 0.25)));
    CHECK(same_point(t.vertices[0], project(Vec3(1, 0, 0)), 1e-14));
    CHECK(same_point(t.vertices[1], project(Vec3(0, 1, 0)), 1e-14));
    CHECK(same_point(t.vertices[2], project(Vec3(0, 0, 1)), 1e-14));
    CHECK(t.contains(project(Vec3(1, 1, 1))));
    CHECK_FALSE(t.contains(project(Vec3(1, -1, 1))));
    CHECK(t.distance_to_edge_line(project(Vec3(1, 1, 0)), TriangleEdge::PlusZero) <= 1e-15);

    Gen g(14);
    const Mat3 q = g.conjugator(50.0);
    const PrincipalTriangle c = principal_triangle(UnimodularMatrix(q * diag(4, 1, 0.25) * q.inverse()));
    for (int i = 0; i < 3; ++i) CHECK(same_point(c.vertices[i], project(q.col(i)), 1e-10));

    Mat3 jordan = Mat3::Identity();
    jordan(0, 1) = jordan(1, 2) = 1.0;
    CHECK_THROWS_AS(principal_triangle(UnimodularMatrix(jordan)), Error);
  }

  TEST_CASE("extended determinant") {
    Gen g(15);
    for (int n = 0; n < 100; ++n) {
      const Mat3 q = g.conjugator(1e2);
      REQUIRE(determinant_extended(q) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}
