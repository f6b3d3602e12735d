#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "rp2ends/developing.hpp"
#include "rp2ends/model_geometry.hpp"
#include "rp2ends/wang_solver.hpp"

namespace rp2ends {

enum class NeckKind { QHNeck, ParabolicNeck };

using CoefficientMap = std::map<int, cplx>;

struct FamilySpec {
  std::function<CoefficientMap(cplx)> a;  // t -> coefficients on the z side
  std::function<CoefficientMap(cplx)> b;  // t -> coefficients on the z' side
  std::vector<cplx> t_sweep;
  NeckKind kind = NeckKind::QHNeck;
  double k = kDefaultCollar;
  int truncation = kDefaultTruncation;
  int log_branch = 0;
  int nx = 32;
  double rows_per_unit = 8.0;
  double alpha = 0.25;
  double beta = 1.0;
  double solve_tol = 1e-10;
  double loop_step = 1e-3;
  // C in sup |z^3 (U_t - U_0)| |log|t||^3 <= C; required for parabolic necks.
  std::optional<double> decay_constant;

  PlumbingDatum datum(cplx t) const;
  cplx limit_residue() const;
  void validate() const;
};

// Family with a_-3 = b_-3 negated and the given extra z-side coefficients.
FamilySpec constant_family(cplx residue, std::vector<cplx> t_sweep);

// Cylinder chart of the collar: y in [-log K, log K - log|t|], the loop
// {mu = 0} at y = -1/2 log|t|, mu = -y - 1/2 log|t|.
double neck_loop_y(cplx t);
std::shared_ptr<const CylinderBackground> neck_background(const PlumbingDatum& d, NeckKind kind);
CylinderGrid neck_grid(const PlumbingDatum& d, NeckKind kind, int nx, double rows_per_unit);

struct NeckSolve {
  CylinderGrid grid;
  SolveReport report;
  BarrierPair barriers;
  double barrier_sup = 0.0;
  bool contained = false;
};

NeckSolve solve_neck(const FamilySpec& spec, cplx t);

struct SweepRow {
  cplx t;
  Triple eigenvalues{};
  Triple deviation{};  // |alpha_i / alpha_i(limit) - 1|
  double max_deviation = 0.0;
  double eigen_product = 1.0;
  double barrier_sup = 0.0;
  double residual = 0.0;
  bool contained = false;
  double loop_agreement = 0.0;  // loops at mu = 0 and mu = 0.5
  int newton_iters = 0;
};

std::vector<SweepRow> qh_sweep(const FamilySpec& spec);

// Non-increasing up to a relative slack on the last `tail` rows.
bool deviations_monotone(const std::vector<SweepRow>& rows, int tail = 3, double slack = 0.10);

double decay_hypothesis_sup(const FamilySpec& spec, cplx t);

struct ParabolicRow {
  cplx t;
  Mat3c a_t;
  double row2 = 0.0;       // max over the loop of the row norms
  double row3 = 0.0;
  double limit_distance = 0.0;
  Triple exp_eigenvalues{};  // moduli of the eigenvalues of e^{2 pi A_t}, descending
  double kappa_deviation = 0.0;  // sup |kappa + 1| on the collar
  double decay_sup = 0.0;
  double barrier_sup = 0.0;
};

// Coefficient matrix on the loop at x from a solved grafted neck.
Mat3c parabolic_neck_matrix(cplx t, const CylinderGrid& solved, double x = 0.0);

std::vector<ParabolicRow> parabolic_sweep(const FamilySpec& spec);

struct PowerFit {
  double gamma = 0.0;
  double delta = 0.0;
};

// Least-squares fit of y = gamma x^delta in log-log coordinates.
PowerFit fit_power(const std::vector<double>& x, const std::vector<double>& y);

struct TwistSweepRow {
  cplx t;
  double y_cut = 0.0;
  TwistEvidence evidence;             // edges read off the model end above the cut
  std::vector<ProjPoint> neck_limits;  // per witness ray, developed from the base point
  std::vector<double> adjacent_deviation;  // chart distance to the previous row's limits
};

// Neck field below y = -1 - 1/2 log|t|, model end of residue a_-3(t) above;
// rays start at (0, base_y).
std::vector<TwistSweepRow> twist_witness_sweep(const FamilySpec& spec, double base_y = 1.0,
                                               double y_max = 40.0,
                                               double witness_tol = kWitnessTol);

// t,lambda1,lambda2,lambda3,dev1,dev2,dev3,residual,barrier_sup
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace rp2ends
