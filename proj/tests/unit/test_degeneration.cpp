#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rp2ends/degeneration.hpp"
#include "rp2ends/error.hpp"
#include "rp2ends/residue_spectrum.hpp"

using namespace rp2ends;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

Triple limit_spectrum(cplx r) {
  const Triple l = chi_roots(r);
  return {std::exp(kTwoPi * l[0]), std::exp(kTwoPi * l[1]), std::exp(kTwoPi * l[2])};
}

FamilySpec perturbed_family(std::vector<cplx> ts) {
  FamilySpec f;
  f.a = [](cplx t) { return CoefficientMap{{-3, 2.0 + t}, {-2, 1.0}}; };
  f.b = [](cplx t) { return CoefficientMap{{-3, -(2.0 + t)}}; };
  f.t_sweep = std::move(ts);
  return f;
}

FamilySpec zero_parabolic(std::vector<cplx> ts) {
  FamilySpec f;
  f.a = [](cplx) { return CoefficientMap{}; };
  f.b = [](cplx) { return CoefficientMap{}; };
  f.t_sweep = std::move(ts);
  f.kind = NeckKind::ParabolicNeck;
  f.decay_constant = 1.0;
  return f;
}

}  // namespace

TEST_SUITE("degeneration") {
  TEST_CASE("neck grids") {
    const FamilySpec f = constant_family(2.0, {1e-2});
    for (double t : {1e-2, 1e-4}) {
      const PlumbingDatum d = f.datum(t);
      const CylinderGrid g = neck_grid(d, NeckKind::QHNeck, 16, 4.0);
      CHECK(g.y1() - g.y0() == doctest::Approx(2.0 * std::log(d.k) - std::log(t)));
      CHECK(neck_loop_y(t) == doctest::Approx(0.5 * (g.y0() + g.y1())));
      double worst = 0.0;
      for (std::size_t n = 0; n < g.size(); ++n) {
        worst = std::max(worst, std::abs(norm_U_squared(g.U[n], std::exp(g.phi[n])) - 0.5));
      }
      CHECK(worst <= 1e-12);
      CHECK(std::abs(g.U.front()) == doctest::Approx(2.0).epsilon(1e-12));
      CHECK(std::abs(g.U.back()) == doctest::Approx(2.0).epsilon(1e-12));
    }
  }

  TEST_CASE("family validation") {
    FamilySpec up = constant_family(2.0, {1e-3, 1e-2});
    CHECK(code_of([&] { up.validate(); }) == ErrorCode::DomainError);
    FamilySpec p = zero_parabolic({1e-2});
    p.a = [](cplx) { return CoefficientMap{{-3, 1.0}}; };
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::PreconditionViolated);
    FamilySpec q = perturbed_family({1e-2});
    q.kind = NeckKind::ParabolicNeck;
    CHECK(code_of([&] { parabolic_sweep(q); }) == ErrorCode::PreconditionViolated);
    FamilySpec noc = zero_parabolic({1e-2});
    noc.decay_constant.reset();
    CHECK(code_of([&] { parabolic_sweep(noc); }) == ErrorCode::DecayHypothesisViolated);
    CHECK(code_of([&] { qh_sweep(zero_parabolic({1e-2})); }) == ErrorCode::PreconditionViolated);
  }

  TEST_CASE("decay hypothesis") {
    CHECK(decay_hypothesis_sup(zero_parabolic({1e-2}), 1e-2) == 0.0);
    FamilySpec f = zero_parabolic({1e-2});
    f.a = [](cplx t) { return CoefficientMap{{-3, 0.5 * t}}; };
    f.b = [](cplx t) { return CoefficientMap{{-3, -0.5 * t}}; };
    const double a = decay_hypothesis_sup(f, 1e-2);
    const double b = decay_hypothesis_sup(f, 1e-4);
    CHECK(a > 0.0);
    CHECK(b < a);
    f.decay_constant = 0.5 * a;
    CHECK(code_of([&] { parabolic_sweep(f); }) == ErrorCode::DecayHypothesisViolated);
  }

  TEST_CASE("constant family is exact") {
    FamilySpec f = constant_family(2.0, {1e-2, 1e-3});
    f.nx = 16;
    f.rows_per_unit = 4.0;
    const std::vector<SweepRow> rows = qh_sweep(f);
    REQUIRE(rows.size() == 2);
    for (const SweepRow& r : rows) {
      CHECK(r.max_deviation <= 1e-6);
      CHECK(r.contained);
      CHECK(r.eigen_product == doctest::Approx(1.0).epsilon(1e-8));
    }
  }

  TEST_CASE("perturbed QH sweep") {
    const std::vector<SweepRow> rows = qh_sweep(perturbed_family({1e-2, 1e-3, 1e-4, 1e-5}));
    REQUIRE(rows.size() == 4);
    const Triple lim = limit_spectrum(2.0);
    for (const SweepRow& r : rows) {
      CHECK(r.contained);
      CHECK(r.barrier_sup > 0.0);
      CHECK(std::abs(r.eigen_product - 1.0) <= 1e-8);
      CHECK(r.loop_agreement <= 1e-6);
      for (int i = 0; i < 3; ++i) {
        CHECK(r.deviation[i] == doctest::Approx(std::abs(r.eigenvalues[i] / lim[i] - 1.0)).epsilon(1e-9));
      }
    }
    CHECK(deviations_monotone(rows));
    CHECK(rows.back().max_deviation < rows.front().max_deviation);
    CHECK(rows.back().max_deviation <= 1e-2);

    std::ostringstream os;
    write_sweep_csv(os, rows);
    CHECK(os.str().rfind("t,lambda1,lambda2,lambda3,dev1,dev2,dev3,residual,barrier_sup\n", 0) == 0);
  }

  TEST_CASE("monotonicity judgement") {
    std::vector<SweepRow> rows(4);
    const double devs[] = {1.0, 0.5, 0.2, 0.21};
    for (int i = 0; i < 4; ++i) rows[i].max_deviation = devs[i];
    CHECK(deviations_monotone(rows));
    rows[3].max_deviation = 0.3;
    CHECK_FALSE(deviations_monotone(rows));
  }

  TEST_CASE("power fit") {
    const std::vector<double> x{1e-2, 1e-4, 1e-8};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 0.4));
    const PowerFit f = fit_power(x, y);
    CHECK(f.gamma == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(f.delta == doctest::Approx(0.4).epsilon(1e-10));
    CHECK_THROWS_AS(fit_power({1.0}, {1.0}), Error);
    CHECK_THROWS_AS(fit_power({1.0, 2.0}, {1.0, -1.0}), Error);
  }

  TEST_CASE("grafted curvature approaches -1") {
    std::vector<double> ts{1e-2, 1e-4, 1e-8};
    std::vector<double> sup;
    for (double t : ts) {
      const ConformalMetric m = grafted_metric(t, kDefaultCollar);
      double worst = 0.0;
      for (int i = 0; i <= 2000; ++i) {
        const double s = m.s_min() + (m.s_max() - m.s_min()) * i / 2000.0;
        worst = std::max(worst, std::abs(m.curvature_at_s(s) + 1.0));
      }
      sup.push_back(worst);
    }
    CHECK(sup[2] < sup[1]);
    CHECK(sup[1] < sup[0]);
    CHECK(fit_power(ts, sup).delta > 0.0);
  }

  TEST_CASE("parabolic neck with vanishing differential") {
    FamilySpec f = zero_parabolic({1e-2, 1e-4});
    f.nx = 16;
    f.rows_per_unit = 4.0;
    const std::vector<ParabolicRow> rows = parabolic_sweep(f);
    REQUIRE(rows.size() == 2);
    for (const ParabolicRow& r : rows) {
      CHECK(r.decay_sup == 0.0);
      CHECK(r.exp_eigenvalues[0] * r.exp_eigenvalues[1] * r.exp_eigenvalues[2] ==
            doctest::Approx(1.0).epsilon(1e-8));
    }
    const double l0 = -std::log(1e-2);
    const double l1 = -std::log(1e-4);
    CHECK(rows[1].row2 * l1 <= 1.1 * rows[0].row2 * l0);
    CHECK(rows[1].row3 * l1 <= 1.1 * rows[0].row3 * l0);
    CHECK(rows[1].limit_distance < rows[0].limit_distance);
  }

  TEST_CASE("twist witnesses along a constant family") {
    FamilySpec f = constant_family(2.0, {1e-2, 1e-3});
    f.nx = 16;
    f.rows_per_unit = 4.0;
    const std::vector<TwistSweepRow> rows = twist_witness_sweep(f);
    REQUIRE(rows.size() == 2);
    for (const TwistSweepRow& r : rows) {
      CHECK(r.evidence.sign == TwistSign::PlusInfinity);
      CHECK(r.evidence.witnesses.size() == 2);
    }
    for (double d : rows[1].adjacent_deviation) CHECK(d <= 1e-6);
    CHECK(code_of([] { twist_witness_sweep(constant_family(-2.0, {1e-2})); }) ==
          ErrorCode::PreconditionViolated);
  }
}
