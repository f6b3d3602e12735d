#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rp2ends/error.hpp"
#include "rp2ends/wang_solver.hpp"

using namespace rp2ends;

namespace {

double sup(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::shared_ptr<const CylinderBackground> perturbed_flat(double eps) {
  auto p = std::make_shared<CylinderBackground>(*flat_collar_background(cplx(0, 2)));
  const auto base = p->U;
  p->U = [base, eps](double x, double y) { return base(x, y) * (1.0 + eps * std::exp(cplx(-y, x))); };
  return p;
}

CylinderGrid solved(const std::shared_ptr<const CylinderBackground>& bg, int nx, int ny, double y0, double y1,
                    SolveReport* rep = nullptr, BarrierPair* out = nullptr) {
  CylinderGrid g = CylinderGrid::sample(bg, nx, ny, y0, y1);
  BarrierPair b = build_barriers(g, 0.25, 1.0);
  SolveOptions o;
  o.barriers = &b;
  const SolveReport r = solve_wang(g, BoundaryCondition::DirichletZero, 1e-11, o);
  if (rep) *rep = r;
  if (out) *out = b;
  return g;
}

}  // namespace

TEST_SUITE("wang_solver") {
  TEST_CASE("grid construction") {
    CHECK_THROWS_AS(CylinderGrid(4, 16, 0, 1), Error);
    CHECK_THROWS_AS(CylinderGrid(16, 16, 1, 1), Error);
    const CylinderGrid g(16, 9, 1.0, 3.0);
    CHECK(g.hy() == doctest::Approx(0.25));
    CHECK(g.index(-1, 2) == g.index(15, 2));
    CHECK(g.index(16, 2) == g.index(0, 2));
    CHECK(g.wrap(-33) == 15);
  }

  TEST_CASE("residual of exact and constant data") {
    const CylinderGrid flat = CylinderGrid::sample(flat_collar_background(cplx(0, 2)), 16, 16, 1, 5);
    CHECK(sup(wang_residual(flat)) <= 1e-13);
    const CylinderGrid cusp = CylinderGrid::sample(cusp_background(), 16, 16, 1, 5);
    CHECK(sup(wang_residual(cusp)) <= 1e-13);
    const std::vector<double> ones(cusp.size(), 1.0);
    const std::vector<double> r = wang_residual(cusp, ones);
    for (double v : r) REQUIRE(v == doctest::Approx(-2.0 * std::exp(1.0) + 2.0).epsilon(1e-12));
    CylinderGrid empty;
    CHECK_THROWS_AS(wang_residual(empty), Error);
  }

  TEST_CASE("residual is second-order accurate") {
    // harmonic u on the cusp with U = 0: L(u) = -2e^u - 2 kappa exactly
    auto err = [](int n) {
      CylinderGrid g = CylinderGrid::sample(cusp_background(), n, n, 1.0, 3.0);
      for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) g.u[g.index(i, j)] = 0.1 * std::exp(-g.y(j)) * std::cos(g.x(i));
      }
      const std::vector<double> r = wang_residual(g);
      double e = 0.0;
      for (int j = 1; j + 1 < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
          const int k = g.index(i, j);
          const double exact = -2.0 * std::exp(g.u[k]) - 2.0 * g.kappa[k];
          e = std::max(e, std::abs(r[k] - exact));
        }
      }
      return e;
    };
    const double e1 = err(32);
    const double e2 = err(64);
    CHECK(e1 / e2 > 3.0);
  }

  TEST_CASE("barriers on the flat collar") {
    CylinderGrid g = CylinderGrid::sample(perturbed_flat(0.1), 32, 64, 1, 9);
    const BarrierPair b = build_barriers(g, 0.25, 1.0);
    CHECK(barrier_pair_valid(g, b));
    for (std::size_t k = 0; k < g.size(); ++k) {
      REQUIRE(b.S[k] >= 0.0);
      REQUIRE(b.s[k] <= 0.0);
    }
    CHECK(b.S[g.index(0, 0)] == doctest::Approx(b.beta * std::exp(-0.5 * 1.0)));
    // Linearising at S = 0 gives L(S) = (2 alpha^2 - 6) S + O(S^2) here, so
    // alpha = 1.5 (first bracket positive) still passes and alpha > sqrt 3 fails.
    CHECK_NOTHROW(build_barriers(g, 1.5, 1.0));
    try {
      build_barriers(g, 1.8, 1.0);
      FAIL("expected BarrierFailure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BarrierFailure);
    }
  }

  TEST_CASE("parabolic collars get constant barriers") {
    CylinderGrid g = CylinderGrid::sample(cusp_background(), 16, 32, 1, 6);
    const BarrierPair b = build_barriers(g, 0.25, 1.0);
    CHECK(barrier_pair_valid(g, b));
    const double m = parabolic_barrier_level(g);
    CHECK(m >= 1.0);
    // smallest E >= 1 with 2E^3 - 2E^2 >= 0 when U = 0, kappa = -1
    CHECK(m == doctest::Approx(1.0));
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(b.S[k] == b.S[0]);
  }

  TEST_CASE("exact data solves to zero") {
    for (auto bg : {flat_collar_background(cplx(0, 2)), flat_collar_background(cplx(1, -1)), cusp_background()}) {
      SolveReport r;
      solved(bg, 32, 64, 1, 9, &r);
      CHECK(sup(r.u) <= 1e-10);
      CHECK(r.residual_inf <= 1e-11);
    }
  }

  TEST_CASE("perturbed solve is bracketed and unique") {
    SolveReport r;
    BarrierPair b;
    CylinderGrid g = solved(perturbed_flat(0.1), 32, 64, 1, 9, &r, &b);
    CHECK(r.bracketed);
    CHECK(r.residual_inf <= 1e-11);
    CHECK(sup(r.u) > 1e-4);
    for (std::size_t k = 0; k < g.size(); ++k) {
      REQUIRE(b.s[k] <= r.u[k]);
      REQUIRE(r.u[k] <= b.S[k]);
    }
    for (const std::vector<double>* start : {&b.S, &b.s}) {
      CylinderGrid h = CylinderGrid::sample(perturbed_flat(0.1), 32, 64, 1, 9);
      std::vector<double> init = *start;
      for (int i = 0; i < h.nx(); ++i) init[h.index(i, 0)] = init[h.index(i, h.ny() - 1)] = 0.0;
      SolveOptions o;
      o.initial = &init;
      const SolveReport other = solve_wang(h, BoundaryCondition::DirichletZero, 1e-11, o);
      double d = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) d = std::max(d, std::abs(other.u[k] - r.u[k]));
      CHECK(d <= 10 * 1e-11);
    }
  }

  TEST_CASE("solutions converge at second order") {
    auto run = [](int nx, int ny) { return solved(perturbed_flat(0.1), nx, ny, 1, 9); };
    const CylinderGrid a = run(16, 33);
    const CylinderGrid b = run(32, 65);
    const CylinderGrid c = run(64, 129);
    double d1 = 0.0;
    double d2 = 0.0;
    for (int j = 0; j < a.ny(); ++j) {
      for (int i = 0; i < a.nx(); ++i) {
        const double ua = a.u[a.index(i, j)];
        const double ub = b.u[b.index(2 * i, 2 * j)];
        const double uc = c.u[c.index(4 * i, 4 * j)];
        d1 = std::max(d1, std::abs(ua - ub));
        d2 = std::max(d2, std::abs(ub - uc));
      }
    }
    CHECK(d1 / d2 >= 3.5);
    CHECK(d1 / d2 <= 4.5);
  }

  TEST_CASE("neck barrier profile") {
    for (double alpha : {0.1, 0.25, 0.4}) {
      const NeckBarrier n = neck_barrier(1e-4, alpha, 2.0);
      CHECK(n.value(1.0) == doctest::Approx(n.q()).epsilon(1e-14));
      CHECK(n.value(-1.0) == doctest::Approx(n.q()).epsilon(1e-14));
      CHECK(n.q() == doctest::Approx(2.0 * std::pow(1e-4, alpha) * std::exp(2 * alpha)).epsilon(1e-14));
      // the quartic piece inside: value, slope and curvature match at mu = 1
      const double h = 1e-6;
      CHECK(n.value(1.0 - h) == doctest::Approx(n.value(1.0 + h)).epsilon(1e-5));
      const double slope_in = (n.value(1.0 - h) - n.value(1.0 - 2 * h)) / h;
      const double slope_out = (n.value(1.0 + 2 * h) - n.value(1.0 + h)) / h;
      CHECK(slope_in == doctest::Approx(slope_out).epsilon(1e-4));
      CHECK(n.second_derivative(1.0 - 1e-12) == doctest::Approx(4 * alpha * alpha * n.q()).epsilon(1e-9));
      CHECK(n.second_derivative(1.0 + 1e-12) == doctest::Approx(4 * alpha * alpha * n.q()).epsilon(1e-9));
      // outer end of the collar
      const double w = std::log(kDefaultCollar) - 0.5 * std::log(1e-4);
      CHECK(n.value(w) == doctest::Approx(2.0 * std::pow(kDefaultCollar, 2 * alpha)).epsilon(1e-12));
      CHECK(n.value(-w) == doctest::Approx(n.value(w)));
      // finite-difference second derivative inside
      for (double mu : {-0.7, 0.0, 0.3}) {
        const double fd = (n.value(mu + 1e-4) - 2 * n.value(mu) + n.value(mu - 1e-4)) / 1e-8;
        CHECK(fd == doctest::Approx(n.second_derivative(mu)).epsilon(1e-5));
      }
    }
    CHECK_THROWS_AS(neck_barrier(0.5, 0.25, 1.0), Error);
  }

  TEST_CASE("gradient bound") {
    CylinderGrid g = CylinderGrid::sample(flat_collar_background(2.0), 32, 128, 1, 9);
    SolveReport zero;
    zero.u.assign(g.size(), 0.0);
    CHECK(gradient_bound_check(zero, g, 0.25).max_weighted == 0.0);
    const double alpha = 0.25;
    auto field = [&](double eps) {
      SolveReport r;
      r.u.resize(g.size());
      for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) r.u[g.index(i, j)] = eps * std::exp(-2 * alpha * g.y(j));
      }
      return gradient_bound_check(r, g, alpha);
    };
    const GradientReport a = field(1e-3);
    const GradientReport b = field(2e-3);
    CHECK(b.max_weighted / a.max_weighted == doctest::Approx(2.0).epsilon(1e-12));
    // e^phi = 2 on this collar
    CHECK(a.max_weighted == doctest::Approx(2 * alpha * 1e-3 / std::sqrt(2.0)).epsilon(1e-3));
    CHECK(a.decay_exponent == doctest::Approx(2 * alpha).epsilon(1e-3));

    SolveReport r;
    CylinderGrid p = solved(perturbed_flat(0.1), 32, 128, 1, 17, &r);
    CHECK(gradient_bound_check(r, p, alpha).decay_exponent >= 2 * alpha * 0.9);
  }

  TEST_CASE("grid CSV round-trip") {
    SolveReport r;
    const CylinderGrid g = solved(perturbed_flat(0.1), 16, 16, 1, 5, &r);
    std::stringstream ss;
    write_grid_csv(ss, g);
    const std::string first = ss.str();
    CHECK(first.rfind("x,y,phi,u,U_re,U_im,kappa\n", 0) == 0);
    const CylinderGrid back = read_grid_csv(ss);
    CHECK(back.nx() == 16);
    CHECK(back.ny() == 16);
    CHECK(back.y1() == doctest::Approx(5.0));
    for (std::size_t k = 0; k < g.size(); ++k) {
      REQUIRE(back.u[k] == g.u[k]);
      REQUIRE(back.phi[k] == g.phi[k]);
      REQUIRE(back.U[k] == g.U[k]);
    }
    std::stringstream again;
    write_grid_csv(again, back);
    CHECK(again.str() == first);
    std::istringstream bad("x,y\n1,2\n");
    CHECK_THROWS_AS(read_grid_csv(bad), Error);
  }
}
