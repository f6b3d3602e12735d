#include "rp2ends/degeneration.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <ostream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "rp2ends/error.hpp"
#include "rp2ends/residue_spectrum.hpp"

namespace rp2ends {

namespace {

cplx coefficient(const CoefficientMap& m, int k) {
  const auto it = m.find(k);
  return it == m.end() ? cplx(0.0) : it->second;
}

int rows_for(double y0, double y1, double rows_per_unit) {
  return std::max(16, static_cast<int>(std::ceil((y1 - y0) * rows_per_unit)) + 1);
}

// l = log z - 1/2 log t with z = exp(-ix - y).
cplx neck_ell(const PlumbingDatum& d, double x, double y) {
  return cplx(-y, -x) - 0.5 * d.log_t();
}

std::shared_ptr<const CylinderBackground> plumbed_background(const PlumbingDatum& d,
                                                             std::function<double(double)> phi,
                                                             std::function<double(double)> phi_y,
                                                             std::function<double(double)> phi_yy,
                                                             CollarType type, std::string label) {
  auto bg = std::make_shared<CylinderBackground>();
  bg->phi = std::move(phi);
  bg->phi_y = std::move(phi_y);
  bg->phi_yy = std::move(phi_yy);
  const double w = d.mu_half_width();
  bg->U = [d, w](double x, double y) {
    cplx ell = neck_ell(d, x, y);
    // Interpolation stencils may poke a rounding error past the collar ends.
    ell.real(std::clamp(ell.real(), -w, w));
    return cylinder_coefficient(plumbing_differential(d, ell).value);
  };
  bg->type = type;
  bg->label = std::move(label);
  return bg;
}

Triple sorted_desc(Triple v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

}  // namespace

PlumbingDatum FamilySpec::datum(cplx t) const {
  if (!a || !b) throw Error(ErrorCode::ConfigError, "family needs coefficient generators");
  PlumbingDatum d;
  d.t = t;
  d.a = a(t);
  d.b = b(t);
  d.k = k;
  d.truncation = truncation;
  d.log_branch = log_branch;
  d.validate();
  return d;
}

cplx FamilySpec::limit_residue() const { return coefficient(a(cplx(0.0)), -3); }

void FamilySpec::validate() const {
  if (!a || !b) throw Error(ErrorCode::ConfigError, "family needs coefficient generators");
  if (t_sweep.empty()) throw Error(ErrorCode::ConfigError, "empty t sweep");
  for (std::size_t i = 0; i < t_sweep.size(); ++i) {
    if (!(std::abs(t_sweep[i]) > 0.0)) throw Error(ErrorCode::DomainError, "sweep values must be nonzero");
    if (i > 0 && !(std::abs(t_sweep[i]) < std::abs(t_sweep[i - 1]))) {
      throw Error(ErrorCode::DomainError, "|t| must be strictly decreasing along the sweep");
    }
  }
  if (nx < 8 || !(rows_per_unit > 0.0)) throw Error(ErrorCode::DomainError, "bad grid resolution");
  if (kind == NeckKind::QHNeck) {
    const double floor = 0.5 * std::abs(limit_residue());
    if (!(floor > 0.0)) throw Error(ErrorCode::ZeroResidue, "QH neck needs a_-3(0) != 0");
    for (cplx t : t_sweep) {
      if (std::abs(coefficient(a(t), -3)) < floor) {
        throw Error(ErrorCode::DomainError, "a_-3(t) is not bounded away from 0 on the sweep");
      }
    }
  } else if (std::abs(limit_residue()) > 1e-14) {
    throw Error(ErrorCode::PreconditionViolated, "parabolic neck needs a_-3(0) = 0");
  }
}

FamilySpec constant_family(cplx residue, std::vector<cplx> t_sweep) {
  FamilySpec f;
  f.a = [residue](cplx) { return CoefficientMap{{-3, residue}}; };
  f.b = [residue](cplx) { return CoefficientMap{{-3, -residue}}; };
  f.t_sweep = std::move(t_sweep);
  f.kind = residue == cplx(0.0) ? NeckKind::ParabolicNeck : NeckKind::QHNeck;
  return f;
}

double neck_loop_y(cplx t) { return -0.5 * std::log(std::abs(t)); }

std::shared_ptr<const CylinderBackground> neck_background(const PlumbingDatum& d, NeckKind kind) {
  d.validate();
  std::ostringstream label;
  label << "neck t=" << d.t;
  if (kind == NeckKind::QHNeck) {
    const cplx r = coefficient(d.a, -3);
    if (r == cplx(0.0)) throw Error(ErrorCode::ZeroResidue, "QH neck needs a_-3(t) != 0");
    const double p = std::log(std::cbrt(2.0) * std::pow(std::abs(r), 2.0 / 3.0));
    return plumbed_background(
        d, [p](double) { return p; }, [](double) { return 0.0; }, [](double) { return 0.0; },
        CollarType::QuasiHyperbolic, label.str());
  }
  const ConformalMetric m = grafted_metric(d.t, d.k);
  return plumbed_background(
      d, [m](double y) { return m.cylinder_phi(y); }, [m](double y) { return m.cylinder_phi_y(y); },
      [m](double y) { return m.cylinder_phi_yy(y); }, CollarType::Parabolic, label.str());
}

CylinderGrid neck_grid(const PlumbingDatum& d, NeckKind kind, int nx, double rows_per_unit) {
  const double y0 = -std::log(d.k);
  const double y1 = std::log(d.k) - std::log(std::abs(d.t));
  return CylinderGrid::sample(neck_background(d, kind), nx, rows_for(y0, y1, rows_per_unit), y0, y1);
}

NeckSolve solve_neck(const FamilySpec& spec, cplx t) {
  const PlumbingDatum d = spec.datum(t);
  NeckSolve out;
  out.grid = neck_grid(d, spec.kind, spec.nx, spec.rows_per_unit);
  if (spec.kind == NeckKind::QHNeck) {
    const NeckBarrier shape_fn = neck_barrier(t, spec.alpha, 1.0, spec.k);
    const double h = neck_loop_y(t);
    std::vector<double> shape(out.grid.size());
    for (int j = 0; j < out.grid.ny(); ++j) {
      const double v = shape_fn.value(h - out.grid.y(j));
      for (int i = 0; i < out.grid.nx(); ++i) shape[out.grid.index(i, j)] = v;
    }
    out.barriers = tune_barriers(out.grid, shape, spec.alpha, spec.beta);
  } else {
    out.barriers = build_barriers(out.grid, 0.0, spec.beta);
  }
  SolveOptions opts;
  opts.barriers = &out.barriers;
  out.report = solve_wang(out.grid, BoundaryCondition::DirichletZero, spec.solve_tol, opts);
  out.contained = true;
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    out.barrier_sup = std::max(out.barrier_sup, out.barriers.S[k]);
    const double u = out.grid.u[k];
    if (u > out.barriers.S[k] + 1e-12 || u < out.barriers.s[k] - 1e-12) out.contained = false;
  }
  return out;
}

namespace {

SweepRow qh_row(const FamilySpec& spec, cplx t, const Triple& limit) {
  NeckSolve solved = solve_neck(spec, t);
  SweepRow row;
  row.t = t;
  row.barrier_sup = solved.barrier_sup;
  row.residual = solved.report.residual_inf;
  row.contained = solved.contained;
  row.newton_iters = solved.report.newton_iters;
  const GridField field(std::move(solved.grid));
  const double y = neck_loop_y(t);
  const HolonomyLoop loop = holonomy_loop_report(field, y, spec.loop_step);
  const HolonomyLoop shifted = holonomy_loop_report(field, y - 0.5, spec.loop_step);
  row.eigenvalues = loop.eigenvalues;
  row.eigen_product = loop.eigenvalues[0] * loop.eigenvalues[1] * loop.eigenvalues[2];
  for (int i = 0; i < 3; ++i) {
    row.deviation[i] = std::abs(loop.eigenvalues[i] / limit[i] - 1.0);
    row.max_deviation = std::max(row.max_deviation, row.deviation[i]);
    row.loop_agreement = std::max(
        row.loop_agreement, std::abs(shifted.eigenvalues[i] / loop.eigenvalues[i] - 1.0));
  }
  return row;
}

}  // namespace

std::vector<SweepRow> qh_sweep(const FamilySpec& spec) {
  if (spec.kind != NeckKind::QHNeck) throw Error(ErrorCode::PreconditionViolated, "qh_sweep needs a QH neck");
  spec.validate();
  const Triple lambda = chi_roots(spec.limit_residue());
  Triple limit{};
  for (int i = 0; i < 3; ++i) limit[i] = std::exp(kTwoPi * lambda[i]);
  limit = sorted_desc(limit);
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(spec.t_sweep.size());
  for (cplx t : spec.t_sweep) {
    jobs.push_back(std::async(std::launch::async, [&spec, t, limit] { return qh_row(spec, t, limit); }));
  }
  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

bool deviations_monotone(const std::vector<SweepRow>& rows, int tail, double slack) {
  const int n = static_cast<int>(rows.size());
  for (int i = std::max(1, n - tail + 1); i < n; ++i) {
    if (rows[i].max_deviation > rows[i - 1].max_deviation * (1.0 + slack)) return false;
  }
  return true;
}

double decay_hypothesis_sup(const FamilySpec& spec, cplx t) {
  PlumbingDatum diff = spec.datum(t);
  const CoefficientMap a0 = spec.a(cplx(0.0));
  const CoefficientMap b0 = spec.b(cplx(0.0));
  for (const auto& [m, v] : a0) diff.a[m] -= v;
  for (const auto& [m, v] : b0) diff.b[m] -= v;
  const double w = diff.mu_half_width();
  constexpr int kNx = 64;
  constexpr int kNmu = 256;
  double sup = 0.0;
  for (int j = 0; j <= kNmu; ++j) {
    const double mu = -w + 2.0 * w * j / kNmu;
    for (int i = 0; i < kNx; ++i) {
      const cplx ell(mu, -kTwoPi * i / kNx - 0.5 * diff.log_t().imag());
      sup = std::max(sup, std::abs(plumbing_differential(diff, ell).value));
    }
  }
  return sup * std::pow(std::abs(std::log(std::abs(t))), 3);
}

Mat3c parabolic_neck_matrix(cplx t, const CylinderGrid& solved, double x) {
  const GridField field(solved);
  return field.at(x, neck_loop_y(t)).ax;
}

namespace {

double kappa_deviation(cplx t, double k) {
  const ConformalMetric m = grafted_metric(t, k);
  constexpr int kSamples = 4000;
  double sup = 0.0;
  for (int i = 0; i <= kSamples; ++i) {
    const double s = m.s_min() + (m.s_max() - m.s_min()) * i / kSamples;
    sup = std::max(sup, std::abs(m.curvature_at_s(s) + 1.0));
  }
  return sup;
}

ParabolicRow parabolic_row(const FamilySpec& spec, cplx t) {
  ParabolicRow row;
  row.t = t;
  row.decay_sup = decay_hypothesis_sup(spec, t);
  if (row.decay_sup > *spec.decay_constant) {
    std::ostringstream os;
    os << "decay hypothesis fails at t = " << t << ": " << row.decay_sup << " > C = "
       << *spec.decay_constant;
    throw Error(ErrorCode::DecayHypothesisViolated, os.str());
  }
  NeckSolve solved = solve_neck(spec, t);
  row.barrier_sup = solved.barrier_sup;
  row.kappa_deviation = kappa_deviation(t, spec.k);
  row.a_t = parabolic_neck_matrix(t, solved.grid);
  const GridField field(std::move(solved.grid));
  const double y = neck_loop_y(t);
  constexpr int kLoopSamples = 64;
  Mat3c limit = Mat3c::Zero();
  limit(0, 1) = limit(0, 2) = 1.0;
  for (int i = 0; i < kLoopSamples; ++i) {
    const Mat3c a = field.at(kTwoPi * i / kLoopSamples, y).ax;
    row.row2 = std::max(row.row2, a.row(1).norm());
    row.row3 = std::max(row.row3, a.row(2).norm());
    row.limit_distance = std::max(row.limit_distance, (a - limit).norm());
  }
  const Mat3c e = (kTwoPi * row.a_t).exp();
  const Eigen::Vector3cd ev = e.eigenvalues();
  Triple mods{};
  for (int i = 0; i < 3; ++i) mods[i] = std::abs(ev[i]);
  row.exp_eigenvalues = sorted_desc(mods);
  return row;
}

}  // namespace

std::vector<ParabolicRow> parabolic_sweep(const FamilySpec& spec) {
  if (spec.kind != NeckKind::ParabolicNeck) {
    throw Error(ErrorCode::PreconditionViolated, "parabolic_sweep needs a parabolic neck");
  }
  spec.validate();
  if (!spec.decay_constant) {
    throw Error(ErrorCode::DecayHypothesisViolated, "family carries no decay constant C");
  }
  std::vector<std::future<ParabolicRow>> jobs;
  for (cplx t : spec.t_sweep) {
    jobs.push_back(std::async(std::launch::async, [&spec, t] { return parabolic_row(spec, t); }));
  }
  std::vector<ParabolicRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

PowerFit fit_power(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::DomainError, "fit needs two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error(ErrorCode::DomainError, "fit needs positive data");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error(ErrorCode::DomainError, "degenerate fit abscissae");
  PowerFit f;
  f.delta = (n * sxy - sx * sy) / den;
  f.gamma = std::exp((sy - f.delta * sx) / n);
  return f;
}

std::vector<TwistSweepRow> twist_witness_sweep(const FamilySpec& spec, double base_y, double y_max,
                                               double witness_tol) {
  if (spec.kind != NeckKind::QHNeck) throw Error(ErrorCode::PreconditionViolated, "twist sweep needs a QH neck");
  spec.validate();
  if (!(spec.limit_residue().real() > 0.0)) {
    throw Error(ErrorCode::PreconditionViolated,
                "twist witness sweep needs Re a_-3(0) > 0; the opposite end twists to minus infinity");
  }
  std::vector<TwistSweepRow> rows;
  for (cplx t : spec.t_sweep) {
    const double y_cut = -1.0 - 0.5 * std::log(std::abs(t));
    if (!(base_y > -std::log(spec.k) && base_y < y_cut)) {
      throw Error(ErrorCode::DomainError, "base height must lie inside the collar below the cutoff");
    }
    NeckSolve solved = solve_neck(spec, t);
    const cplx r = coefficient(spec.a(t), -3);
    auto inner = std::make_shared<GridField>(std::move(solved.grid));
    auto outer = std::make_shared<ConstantField>(ConstantField::model_end(r, y_cut + 1.0));
    const CutoffField field(inner, outer, y_cut);

    TwistSweepRow row;
    row.t = t;
    row.y_cut = y_cut;
    // Above the cut each ray solves the model equation, so its edge is read
    // off the model end; the limit itself is developed through the neck.
    TwistOptions opts;
    opts.y_max = std::max(y_max, y_cut + 20.0);
    opts.step = spec.loop_step;
    opts.witness_tol = witness_tol;
    row.evidence = detect_twist(*outer, r, opts);

    const cplx c = model_coordinate_scale(r);
    const AffineFrame f0 = initial_frame(field.at(0.0, base_y).psi, c / std::abs(c));
    RayOptions ray;
    ray.step = spec.loop_step;
    for (const TwistWitness& w : row.evidence.witnesses) {
      ray.max_length = std::max(ray.max_length, (opts.y_max - base_y) / std::sin(w.iota) + 1.0);
      const DevelopedCurve curve = develop_ray_from(field, f0, 0.0, base_y, w.iota, opts.y_max, ray);
      row.neck_limits.push_back(*curve.limit);
    }
    if (!rows.empty()) {
      for (std::size_t i = 0; i < row.neck_limits.size(); ++i) {
        row.adjacent_deviation.push_back(chart_distance(row.neck_limits[i], rows.back().neck_limits[i]));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "t,lambda1,lambda2,lambda3,dev1,dev2,dev3,residual,barrier_sup\n";
  const auto old = os.precision(17);
  for (const SweepRow& r : rows) {
    os << r.t.real();
    for (double v : r.eigenvalues) os << ',' << v;
    for (double v : r.deviation) os << ',' << v;
    os << ',' << r.residual << ',' << r.barrier_sup << '\n';
  }
  os.precision(old);
}

}  // namespace rp2ends
