#include <benchmark/benchmark.h>

#include <cmath>

#include "rp2ends/developing.hpp"
#include "rp2ends/levinson.hpp"
#include "rp2ends/residue_spectrum.hpp"
#include "rp2ends/wang_solver.hpp"

using namespace rp2ends;

static void BM_ChiRoots(benchmark::State& state) {
  double re = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(chi_roots(cplx(re, 1.7)));
    re += 1e-9;
  }
}
BENCHMARK(BM_ChiRoots);

static void BM_ClassifyResidue(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(classify_residue(cplx(1.0, -1.0)));
}
BENCHMARK(BM_ClassifyResidue);

static void BM_WangPerturbedSolve(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  auto bg = std::make_shared<CylinderBackground>(*flat_collar_background(cplx(0, 2)));
  const auto base = bg->U;
  bg->U = [base](double x, double y) { return base(x, y) * (1.0 + 0.1 * std::exp(cplx(-y, x))); };
  for (auto _ : state) {
    CylinderGrid g = CylinderGrid::sample(bg, nx, 4 * nx, 1.0, 9.0);
    const BarrierPair b = build_barriers(g, 0.25, 1.0);
    SolveOptions o;
    o.barriers = &b;
    benchmark::DoNotOptimize(solve_wang(g, BoundaryCondition::DirichletZero, 1e-10, o));
  }
}
BENCHMARK(BM_WangPerturbedSolve)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_HolonomyLoop(benchmark::State& state) {
  const ConstantField f = ConstantField::model_end(2.0);
  const double step = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(holonomy_loop_report(f, 5.0, step));
}
BENCHMARK(BM_HolonomyLoop)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_ModelRay(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(develop_model_ray(kPi / 3));
}
BENCHMARK(BM_ModelRay)->Unit(benchmark::kMillisecond);

static void BM_LevinsonIterate(benchmark::State& state) {
  Eigen::MatrixXcd m(3, 3);
  m << 0.1, 0.2, -0.1, 0.05, 0.0, 0.3, -0.2, 0.1, 0.1;
  const PerturbedSystem sys([](double) { return 1.0; }, {1.0, 0.0, -1.0},
                            [m](double s, double y) { return Eigen::MatrixXcd(s * std::exp(-y) * m); }, 0.0);
  LevinsonOptions o;
  o.y_max = 20;
  for (auto _ : state) benchmark::DoNotOptimize(iterate_solution(sys, 1.0, 1, o));
}
BENCHMARK(BM_LevinsonIterate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
