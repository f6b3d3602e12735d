#include "rp2ends/wang_solver.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "rp2ends/error.hpp"

namespace rp2ends {

double CylinderBackground::kappa(double y) const {
  return -0.5 * std::exp(-phi(y)) * phi_yy(y);
}

std::shared_ptr<const CylinderBackground> end_background(const CubicLaurent& u,
                                                         const ConformalMetric& metric) {
  auto bg = std::make_shared<CylinderBackground>();
  bg->phi = [metric](double y) { return metric.cylinder_phi(y); };
  bg->phi_y = [metric](double y) { return metric.cylinder_phi_y(y); };
  bg->phi_yy = [metric](double y) { return metric.cylinder_phi_yy(y); };
  bg->U = [u](double x, double y) { return cylinder_differential(u, x, y); };
  bg->type = u.residue() == cplx(0.0) ? CollarType::Parabolic : CollarType::QuasiHyperbolic;
  bg->label = std::string(metric_kind_name(metric.kind())) + " end";
  return bg;
}

std::shared_ptr<const CylinderBackground> flat_collar_background(cplx residue) {
  return end_background(CubicLaurent::pure(residue), ConformalMetric::flat(std::abs(residue)));
}

std::shared_ptr<const CylinderBackground> cusp_background() {
  return end_background(CubicLaurent(), ConformalMetric::cusp());
}

CylinderGrid::CylinderGrid(int nx, int ny, double y0, double y1)
    : nx_(nx), ny_(ny), y0_(y0), y1_(y1) {
  if (nx < 8 || ny < 8) throw Error(ErrorCode::DomainError, "grid needs Nx, Ny >= 8");
  if (!(y1 > y0)) throw Error(ErrorCode::DomainError, "grid needs y1 > y0");
  hx_ = kTwoPi / nx;
  hy_ = (y1 - y0) / (ny - 1);
  phi.assign(size(), 0.0);
  u.assign(size(), 0.0);
  U.assign(size(), cplx(0.0));
  kappa.assign(size(), 0.0);
}

CylinderGrid CylinderGrid::sample(std::shared_ptr<const CylinderBackground> bg, int nx, int ny,
                                  double y0, double y1) {
  CylinderGrid g(nx, ny, y0, y1);
  for (int j = 0; j < ny; ++j) {
    const double yj = g.y(j);
    const double p = bg->phi(yj);
    const double k = bg->kappa(yj);
    for (int i = 0; i < nx; ++i) {
      const int n = g.index(i, j);
      g.phi[n] = p;
      g.kappa[n] = k;
      g.U[n] = bg->U(g.x(i), yj);
    }
  }
  g.set_background(std::move(bg));
  g.validate();
  return g;
}

void CylinderGrid::validate() const {
  const std::size_t n = size();
  if (n == 0 || phi.size() != n || u.size() != n || U.size() != n || kappa.size() != n) {
    throw Error(ErrorCode::UnpopulatedField, "grid fields are missing or mis-sized");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(phi[k]) || !std::isfinite(u[k]) || !std::isfinite(kappa[k]) ||
        !std::isfinite(U[k].real()) || !std::isfinite(U[k].imag())) {
      throw Error(ErrorCode::UnpopulatedField, "non-finite value at node " + std::to_string(k));
    }
  }
}

namespace {

double laplacian(const CylinderGrid& g, const std::vector<double>& u, int i, int j) {
  const int ny = g.ny();
  const double c = u[g.index(i, j)];
  const double uxx = (u[g.index(i + 1, j)] - 2.0 * c + u[g.index(i - 1, j)]) / (g.hx() * g.hx());
  double uyy = 0.0;
  if (j == 0) {
    uyy = 2.0 * c - 5.0 * u[g.index(i, 1)] + 4.0 * u[g.index(i, 2)] - u[g.index(i, 3)];
  } else if (j == ny - 1) {
    uyy = 2.0 * c - 5.0 * u[g.index(i, ny - 2)] + 4.0 * u[g.index(i, ny - 3)] - u[g.index(i, ny - 4)];
  } else {
    uyy = u[g.index(i, j + 1)] - 2.0 * c + u[g.index(i, j - 1)];
  }
  return uxx + uyy / (g.hy() * g.hy());
}

double norm2_at(const CylinderGrid& g, int n) {
  return norm_U_squared(g.U[n], std::exp(g.phi[n]));
}

double pointwise(const CylinderGrid& g, int n, double lap, double un) {
  return std::exp(-g.phi[n]) * lap + 4.0 * std::exp(-2.0 * un) * norm2_at(g, n) -
         2.0 * std::exp(un) - 2.0 * g.kappa[n];
}

double interior_inf(const CylinderGrid& g, const std::vector<double>& r) {
  double m = 0.0;
  for (int j = 1; j + 1 < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) m = std::max(m, std::abs(r[g.index(i, j)]));
  }
  return m;
}

std::vector<double> interior_residual(const CylinderGrid& g, const std::vector<double>& u) {
  std::vector<double> r(g.size(), 0.0);
  for (int j = 1; j + 1 < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int n = g.index(i, j);
      r[n] = pointwise(g, n, laplacian(g, u, i, j), u[n]);
    }
  }
  return r;
}

}  // namespace

std::vector<double> wang_residual(const CylinderGrid& grid, const std::vector<double>& u) {
  grid.validate();
  if (u.size() != grid.size()) throw Error(ErrorCode::UnpopulatedField, "u has the wrong size");
  std::vector<double> r(grid.size());
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const int n = grid.index(i, j);
      r[n] = pointwise(grid, n, laplacian(grid, u, i, j), u[n]);
    }
  }
  return r;
}

std::vector<double> wang_residual(const CylinderGrid& grid) { return wang_residual(grid, grid.u); }

bool barrier_pair_valid(const CylinderGrid& grid, const BarrierPair& b, double tol_b) {
  if (b.S.size() != grid.size() || b.s.size() != grid.size()) return false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(b.S[k] >= 0.0) || !(b.s[k] <= 0.0)) return false;
  }
  for (int j = 1; j + 1 < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const int n = grid.index(i, j);
      if (!(pointwise(grid, n, laplacian(grid, b.S, i, j), b.S[n]) <= tol_b)) return false;
      if (!(pointwise(grid, n, laplacian(grid, b.s, i, j), b.s[n]) >= -tol_b)) return false;
    }
  }
  return true;
}

namespace {

template <class Ok>
double bisect_level(Ok ok) {
  double lo = 1.0;
  if (ok(lo)) return lo;
  double hi = 2.0;
  int guard = 0;
  while (!ok(hi)) {
    hi *= 2.0;
    if (++guard > 60) throw Error(ErrorCode::BarrierFailure, "no constant barrier level");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) hi = mid; else lo = mid;
  }
  return hi;
}

// Upper: g(E) = 2E^3 + 2 kmin E^2 - 4 n2max >= 0 is the worst node.
double upper_level(const CylinderGrid& grid) {
  double n2max = 0.0;
  double kmin = 1e300;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    n2max = std::max(n2max, norm2_at(grid, static_cast<int>(k)));
    kmin = std::min(kmin, grid.kappa[k]);
  }
  return bisect_level([&](double e) { return 2.0 * e * e * e + 2.0 * kmin * e * e - 4.0 * n2max >= 0.0; });
}

// Lower constant -M needs 4E^2 n2 - 2/E - 2 kappa >= 0 at every node.
double lower_level(const CylinderGrid& grid) {
  return bisect_level([&](double e) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double v = 4.0 * e * e * norm2_at(grid, static_cast<int>(k)) - 2.0 / e - 2.0 * grid.kappa[k];
      if (v < 0.0) return false;
    }
    return true;
  });
}

}  // namespace

double parabolic_barrier_level(const CylinderGrid& grid) {
  return std::max(upper_level(grid), lower_level(grid));
}

BarrierPair tune_barriers(const CylinderGrid& grid, const std::vector<double>& shape, double alpha,
                          double beta_init, double tol_b) {
  if (!(beta_init > 0.0)) throw Error(ErrorCode::BarrierFailure, "beta must be positive");
  BarrierPair b;
  b.alpha = alpha;
  double beta = beta_init;
  for (int d = 0; d <= 40; ++d) {
    b.beta = beta;
    b.doublings = d;
    b.S.resize(grid.size());
    b.s.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      b.S[k] = beta * shape[k];
      b.s[k] = -b.S[k];
    }
    if (barrier_pair_valid(grid, b, tol_b)) return b;
    beta *= 2.0;
  }
  std::ostringstream os;
  os << "no valid barrier after 40 doublings (alpha = " << alpha << ")";
  throw Error(ErrorCode::BarrierFailure, os.str());
}

BarrierPair build_barriers(const CylinderGrid& grid, double alpha, double beta_init, double tol_b) {
  grid.validate();
  const bool parabolic = grid.background() && grid.background()->type == CollarType::Parabolic;
  if (parabolic) {
    BarrierPair b;
    b.alpha = 0.0;
    const double m_up = std::log(upper_level(grid));
    bool constant_lower = true;
    try {
      b.beta = std::max(m_up, std::log(lower_level(grid)));
    } catch (const Error&) {
      constant_lower = false;
    }
    if (constant_lower) {
      b.S.assign(grid.size(), b.beta);
      b.s.assign(grid.size(), -b.beta);
    } else {
      // Somewhere kappa >= 0 and U = 0: use the convex lower barrier
      // -M + c((y - y_mid)^2 - H^2), with c covering e^phi (kappa + e^-M).
      b.beta = m_up;
      const double em = std::exp(-m_up);
      double c = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        c = std::max(c, std::exp(grid.phi[k]) * (grid.kappa[k] + em));
      }
      c = 1.05 * c + 1e-12;
      const double ym = 0.5 * (grid.y0() + grid.y1());
      const double h = 0.5 * (grid.y1() - grid.y0());
      b.S.assign(grid.size(), m_up);
      b.s.assign(grid.size(), 0.0);
      for (int j = 0; j < grid.ny(); ++j) {
        const double d = grid.y(j) - ym;
        const double v = -m_up + c * (d * d - h * h);
        for (int i = 0; i < grid.nx(); ++i) b.s[grid.index(i, j)] = v;
      }
    }
    if (!barrier_pair_valid(grid, b, tol_b)) {
      throw Error(ErrorCode::BarrierFailure, "constant barrier fails the discrete check");
    }
    return b;
  }
  if (!(alpha > 0.0)) throw Error(ErrorCode::BarrierFailure, "alpha must be positive");
  std::vector<double> shape(grid.size());
  for (int j = 0; j < grid.ny(); ++j) {
    const double v = std::exp(-2.0 * alpha * grid.y(j));
    for (int i = 0; i < grid.nx(); ++i) shape[grid.index(i, j)] = v;
  }
  return tune_barriers(grid, shape, alpha, beta_init, tol_b);
}

SolveReport solve_wang(CylinderGrid& grid, BoundaryCondition bc, double tol, const SolveOptions& opts) {
  grid.validate();
  if (!(tol >= 1e-12)) throw Error(ErrorCode::DomainError, "tolerance must be >= 1e-12");
  const int nx = grid.nx();
  const int ny = grid.ny();
  const int nint = nx * (ny - 2);

  std::vector<double> u(grid.size(), 0.0);
  if (opts.initial) {
    if (opts.initial->size() != grid.size()) throw Error(ErrorCode::UnpopulatedField, "bad initial guess");
    u = *opts.initial;
  }
  for (int i = 0; i < nx; ++i) {
    for (int j : {0, ny - 1}) {
      const int n = grid.index(i, j);
      u[n] = bc == BoundaryCondition::DirichletZero ? 0.0 : grid.u[n];
    }
  }

  auto unknown = [nx](int i, int j) { return (j - 1) * nx + i; };
  const double ihx2 = 1.0 / (grid.hx() * grid.hx());
  const double ihy2 = 1.0 / (grid.hy() * grid.hy());

  Eigen::SparseMatrix<double> a(nint, nint);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nint) * 5);
  std::vector<int> diag_slot;
  auto assemble = [&](const std::vector<double>& uc) {
    trip.clear();
    for (int j = 1; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int n = grid.index(i, j);
        const int r = unknown(i, j);
        const double d = std::exp(grid.phi[n]) *
                         (8.0 * std::exp(-2.0 * uc[n]) * norm2_at(grid, n) + 2.0 * std::exp(uc[n]));
        trip.emplace_back(r, r, 2.0 * ihx2 + 2.0 * ihy2 + d);
        trip.emplace_back(r, unknown(grid.wrap(i + 1), j), -ihx2);
        trip.emplace_back(r, unknown(grid.wrap(i - 1), j), -ihx2);
        if (j > 1) trip.emplace_back(r, unknown(i, j - 1), -ihy2);
        if (j + 2 < ny) trip.emplace_back(r, unknown(i, j + 1), -ihy2);
      }
    }
    a.setFromTriplets(trip.begin(), trip.end());
  };

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  std::vector<double> res = interior_residual(grid, u);
  double rn = interior_inf(grid, res);
  SolveReport rep;
  int it = 0;
  bool patterned = false;
  while (rn > tol) {
    if (it >= opts.max_newton) {
      std::ostringstream os;
      os << "no convergence after " << it << " Newton steps, residual " << rn;
      throw Error(ErrorCode::NewtonDivergence, os.str());
    }
    assemble(u);
    if (!patterned) {
      ldlt.analyzePattern(a);
      patterned = true;
    }
    ldlt.factorize(a);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::NewtonDivergence, "factorization failed");
    Eigen::VectorXd f(nint);
    for (int j = 1; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int n = grid.index(i, j);
        f[unknown(i, j)] = std::exp(grid.phi[n]) * res[n];
      }
    }
    const Eigen::VectorXd delta = ldlt.solve(f);
    double lambda = 1.0;
    bool accepted = false;
    std::vector<double> trial(u);
    for (int h = 0; h <= opts.max_halvings; ++h) {
      for (int j = 1; j + 1 < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const int n = grid.index(i, j);
          trial[n] = u[n] + lambda * delta[unknown(i, j)];
        }
      }
      std::vector<double> tres = interior_residual(grid, trial);
      const double tn = interior_inf(grid, tres);
      if (std::isfinite(tn) && tn < rn) {
        u.swap(trial);
        res.swap(tres);
        rn = tn;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    ++it;
    if (!accepted) {
      if (rn <= 100.0 * tol && rn < 1e-9) break;
      std::ostringstream os;
      os << "line search exhausted at residual " << rn;
      throw Error(ErrorCode::NewtonDivergence, os.str());
    }
  }
  if (rn > tol) {
    std::ostringstream os;
    os << "stalled at residual " << rn << " above tolerance " << tol;
    throw Error(ErrorCode::NewtonDivergence, os.str());
  }

  rep.u = u;
  rep.residual_inf = rn;
  rep.newton_iters = it;
  if (opts.barriers) {
    const BarrierPair& b = *opts.barriers;
    rep.bracketed = b.S.size() == u.size() && b.s.size() == u.size();
    for (std::size_t k = 0; rep.bracketed && k < u.size(); ++k) {
      if (u[k] > b.S[k] + opts.bracket_slack || u[k] < b.s[k] - opts.bracket_slack) rep.bracketed = false;
    }
    if (!rep.bracketed && opts.throw_on_bracket_violation) {
      throw Error(ErrorCode::BracketsViolated, "solution leaves the barrier bracket");
    }
  }
  grid.u = u;
  return rep;
}

double NeckBarrier::q() const { return beta * std::pow(t_abs, alpha) * std::exp(2.0 * alpha); }

double NeckBarrier::value(double mu) const {
  const double m = std::abs(mu);
  if (m >= 1.0) return beta * std::pow(t_abs, alpha) * std::exp(2.0 * alpha * m);
  const double a = alpha;
  const double m2 = m * m;
  return q() * ((1.0 - 1.25 * a + 0.5 * a * a) + (1.5 * a - a * a) * m2 + (-0.25 * a + 0.5 * a * a) * m2 * m2);
}

double NeckBarrier::second_derivative(double mu) const {
  const double m = std::abs(mu);
  if (m >= 1.0) return 4.0 * alpha * alpha * value(mu);
  return alpha * q() * ((3.0 - 2.0 * alpha) + (-3.0 + 6.0 * alpha) * m * m);
}

NeckBarrier neck_barrier(cplx t, double alpha, double beta, double c) {
  const double ta = std::abs(t);
  if (!(ta > 0.0 && ta < c * c)) throw Error(ErrorCode::NeckTooWide, "need 0 < |t| < c^2");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error(ErrorCode::DomainError, "alpha, beta must be positive");
  return {ta, alpha, beta};
}

GradientReport gradient_bound_check(const SolveReport& report, const CylinderGrid& grid, double alpha) {
  GradientReport out;
  const int nx = grid.nx();
  const int ny = grid.ny();
  const std::vector<double>& u = report.u;
  std::vector<double> row_max(ny, 0.0);
  for (int j = 1; j + 1 < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n = grid.index(i, j);
      const double ux = (u[grid.index(i + 1, j)] - u[grid.index(i - 1, j)]) / (2.0 * grid.hx());
      const double uy = (u[grid.index(i, j + 1)] - u[grid.index(i, j - 1)]) / (2.0 * grid.hy());
      const double g = std::exp(-0.5 * grid.phi[n]) * std::hypot(ux, uy);
      row_max[j] = std::max(row_max[j], g);
      out.max_gradient = std::max(out.max_gradient, g);
      out.max_weighted = std::max(out.max_weighted, g * std::exp(2.0 * alpha * grid.y(j)));
    }
  }
  // Least-squares slope of log(row max) over the middle half.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int j = ny / 4; j <= 3 * ny / 4; ++j) {
    if (!(row_max[j] > 1e-300)) continue;
    const double yy = grid.y(j);
    const double ly = std::log(row_max[j]);
    sx += yy;
    sy += ly;
    sxx += yy * yy;
    sxy += yy * ly;
    ++cnt;
  }
  if (cnt >= 2) {
    const double den = cnt * sxx - sx * sx;
    if (den > 0) out.decay_exponent = -(cnt * sxy - sx * sy) / den;
  }
  return out;
}

void write_grid_csv(std::ostream& os, const CylinderGrid& grid) {
  os.precision(17);
  os << "x,y,phi,u,U_re,U_im,kappa\n";
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const int n = grid.index(i, j);
      os << grid.x(i) << "," << grid.y(j) << "," << grid.phi[n] << "," << grid.u[n] << ","
         << grid.U[n].real() << "," << grid.U[n].imag() << "," << grid.kappa[n] << "\n";
    }
  }
}

CylinderGrid read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "empty grid CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,phi,u,U_re,U_im,kappa") throw Error(ErrorCode::ParseError, "unexpected header: " + line);
  std::vector<std::array<double, 7>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::array<double, 7> r{};
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c < 7; ++c) {
      if (!std::getline(ls, cell, ',')) throw Error(ErrorCode::ParseError, "short row at line " + std::to_string(lineno));
      try {
        std::size_t pos = 0;
        r[c] = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad number '" + cell + "' at line " + std::to_string(lineno));
      }
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "grid CSV has no rows");
  int nx = 0;
  while (nx < static_cast<int>(rows.size()) && rows[nx][1] == rows[0][1]) ++nx;
  if (nx == 0 || rows.size() % nx != 0) throw Error(ErrorCode::ParseError, "rows do not form a grid");
  const int ny = static_cast<int>(rows.size()) / nx;
  CylinderGrid g(nx, ny, rows.front()[1], rows.back()[1]);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const auto& r = rows[static_cast<std::size_t>(j) * nx + i];
      const int n = g.index(i, j);
      g.phi[n] = r[2];
      g.u[n] = r[3];
      g.U[n] = cplx(r[4], r[5]);
      g.kappa[n] = r[6];
    }
  }
  g.validate();
  return g;
}

}  // namespace rp2ends
