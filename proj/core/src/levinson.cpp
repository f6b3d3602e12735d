#include "rp2ends/levinson.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "rp2ends/error.hpp"
#include "rp2ends/residue_spectrum.hpp"

namespace rp2ends {

namespace {

constexpr double kEqualMu = 1e-12;

struct Grid {
  double t0 = 0.0;
  double h = 0.0;
  int intervals = 0;
  double y(int j) const { return t0 + h * j; }
};

Grid make_grid(const PerturbedSystem& sys, const LevinsonOptions& opts) {
  const double len = opts.y_max - sys.t_start();
  if (!(len > 0.0)) throw Error(ErrorCode::PreconditionViolated, "y_max must exceed T");
  if (!(opts.step > 0.0)) throw Error(ErrorCode::PreconditionViolated, "quadrature step must be positive");
  Grid g;
  g.t0 = sys.t_start();
  g.intervals = std::max(4, static_cast<int>(std::ceil(len / opts.step - 1e-9)));
  g.h = len / g.intervals;
  return g;
}

double row_abs(const MatXc& r, int i) { return r.row(i).cwiseAbs().sum(); }
double total_abs(const MatXc& r) { return r.cwiseAbs().sum(); }

// Integral over [a, b] by the trapezoid rule with roughly `step` spacing.
template <class F>
double trapezoid(F&& f, double a, double b, double step) {
  if (!(b > a)) return 0.0;
  const int n = std::max(2, static_cast<int>(std::ceil((b - a) / step)));
  const double h = (b - a) / n;
  double sum = 0.5 * (f(a) + f(b));
  for (int j = 1; j < n; ++j) sum += f(a + h * j);
  return sum * h;
}

// Integral of a nonnegative profile on [y_max, inf) from two adjacent
// windows and a geometric continuation.
template <class F>
double tail_estimate(F&& f, double y_max, double window, double step) {
  const double i1 = trapezoid(f, y_max, y_max + window, step);
  const double i2 = trapezoid(f, y_max + window, y_max + 2.0 * window, step);
  if (i1 == 0.0 && i2 == 0.0) return 0.0;
  if (!(i2 < i1)) {
    std::ostringstream os;
    os << "perturbation tail does not shrink: " << i1 << " then " << i2 << " on windows of length "
       << window << " beyond " << y_max;
    throw Error(ErrorCode::NonIntegrablePerturbation, os.str());
  }
  const double r = i2 / i1;
  return i1 + i2 + i2 * r / (1.0 - r);
}

double tail_window(const PerturbedSystem& sys, const LevinsonOptions& opts) {
  return std::max(1.0, 0.25 * (opts.y_max - sys.t_start()));
}

// Integral over one grid interval of a smooth profile sampled at nodes
// j-1..j+2; one-sided cubic at the ends.
template <class P>
auto interval_integral(P&& p, int j, int intervals, double h) {
  if (j == 0) return (h / 24.0) * (9.0 * p(0) + 19.0 * p(1) - 5.0 * p(2) + p(3));
  if (j == intervals - 1) {
    const int n = intervals;
    return (h / 24.0) * (9.0 * p(n) + 19.0 * p(n - 1) - 5.0 * p(n - 2) + p(n - 3));
  }
  return (h / 24.0) * (-p(j - 1) + 13.0 * p(j) + 13.0 * p(j + 1) - p(j + 2));
}

}  // namespace

PerturbedSystem::PerturbedSystem(Scalar c, std::vector<double> mu, Term r, double t_start)
    : c_(std::move(c)), mu_(std::move(mu)), r_(std::move(r)), t_start_(t_start) {
  if (mu_.empty()) throw Error(ErrorCode::PreconditionViolated, "B must be non-empty");
  for (std::size_t i = 0; i + 1 < mu_.size(); ++i) {
    if (mu_[i] < mu_[i + 1]) {
      throw Error(ErrorCode::PreconditionViolated, "diagonal of B must be descending");
    }
  }
  if (!c_ || !r_) throw Error(ErrorCode::PreconditionViolated, "c and R must be callable");
}

double PerturbedSystem::c(double s) const {
  const double v = c_(s);
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "c(s) = " << v << " at s = " << s << " must be positive";
    throw Error(ErrorCode::PreconditionViolated, os.str());
  }
  return v;
}

int split_index(const std::vector<double>& mu, int k) {
  const int n = static_cast<int>(mu.size());
  if (k < 1 || k > n) throw Error(ErrorCode::PreconditionViolated, "k out of range");
  int q = k;
  while (q < n && std::abs(mu[q] - mu[k - 1]) <= kEqualMu * (1.0 + std::abs(mu[k - 1]))) ++q;
  return q;
}

VecXc AsymptoticSolution::x_at(std::size_t j) const { return z[j] * std::exp(c * mu_k * y[j]); }

VecXc AsymptoticSolution::z_interpolate(const PerturbedSystem& sys, double s, double yq) const {
  const double h = y[1] - y[0];
  const int last = static_cast<int>(y.size()) - 1;
  if (yq < y.front() - 1e-12 || yq > y.back() + 1e-12) {
    throw Error(ErrorCode::PreconditionViolated, "sample point outside the solution grid");
  }
  const int j = std::clamp(static_cast<int>(std::floor((yq - y.front()) / h)), 0, last - 1);
  const double t = (yq - y[j]) / h;
  const int n = sys.n();
  auto slope = [&](int node) {
    MatXc a = sys.r(s, y[node]);
    for (int i = 0; i < n; ++i) a(i, i) += c * (sys.mu()[i] - mu_k);
    return VecXc(a * z[node]);
  };
  const double h00 = 2 * t * t * t - 3 * t * t + 1;
  const double h10 = t * t * t - 2 * t * t + t;
  const double h01 = -2 * t * t * t + 3 * t * t;
  const double h11 = t * t * t - t * t;
  return h00 * z[j] + h10 * h * slope(j) + h01 * z[j + 1] + h11 * h * slope(j + 1);
}

AsymptoticSolution iterate_solution(const PerturbedSystem& sys, double s, int k,
                                    const LevinsonOptions& opts) {
  const int n = sys.n();
  const int q = split_index(sys.mu(), k);
  const double c = sys.c(s);
  const Grid g = make_grid(sys, opts);
  const int nodes = g.intervals + 1;

  AsymptoticSolution sol;
  sol.k = k;
  sol.q = q;
  sol.c = c;
  sol.mu_k = sys.mu()[k - 1];
  sol.y.resize(nodes);
  std::vector<MatXc> r(nodes);
  for (int j = 0; j < nodes; ++j) {
    sol.y[j] = g.y(j);
    r[j] = sys.r(s, sol.y[j]);
    if (r[j].rows() != n || r[j].cols() != n || !r[j].allFinite()) {
      throw Error(ErrorCode::PreconditionViolated, "R(s, y) must be a finite n x n matrix");
    }
  }
  const double tail = tail_estimate([&](double y) { return total_abs(sys.r(s, y)); }, opts.y_max,
                                    tail_window(sys, opts), opts.step * 10.0);

  VecXc unit = VecXc::Zero(n);
  unit[k - 1] = 1.0;
  std::vector<VecXc> z(nodes, unit);
  std::vector<VecXc> gvals(nodes);
  std::vector<cplx> acc(nodes);

  bool converged = false;
  for (int m = 0; m < opts.m_max; ++m) {
    for (int j = 0; j < nodes; ++j) gvals[j] = r[j] * z[j];
    std::vector<VecXc> next(nodes, VecXc::Zero(n));
    for (int i = 0; i < n; ++i) {
      const double a = c * (sys.mu()[i] - sol.mu_k);
      if (i < q) {
        // F(y_j) = int_{y_j}^{y_max} e^{a (y_j - sigma)} g_i(sigma) d sigma
        cplx f = 0.0;
        acc[nodes - 1] = 0.0;
        const double decay = std::exp(-a * g.h);
        for (int j = g.intervals - 1; j >= 0; --j) {
          auto p = [&](int l) { return std::exp(a * (g.y(j) - g.y(l))) * gvals[l][i]; };
          f = decay * f + interval_integral(p, j, g.intervals, g.h);
          acc[j] = f;
        }
        for (int j = 0; j < nodes; ++j) next[j][i] = (i == k - 1 ? 1.0 : 0.0) - acc[j];
      } else {
        // P(y_j) = int_T^{y_j} e^{a (y_j - sigma)} g_i(sigma) d sigma
        cplx p_acc = 0.0;
        next[0][i] = 0.0;
        const double decay = std::exp(a * g.h);
        for (int j = 0; j < g.intervals; ++j) {
          auto p = [&](int l) { return std::exp(a * (g.y(j + 1) - g.y(l))) * gvals[l][i]; };
          p_acc = decay * p_acc + interval_integral(p, j, g.intervals, g.h);
          next[j + 1][i] = p_acc;
        }
      }
    }
    double diff = 0.0;
    double scale = 1.0;
    for (int j = 0; j < nodes; ++j) {
      diff = std::max(diff, (next[j] - z[j]).cwiseAbs().maxCoeff());
      scale = std::max(scale, next[j].cwiseAbs().maxCoeff());
    }
    z.swap(next);
    sol.differences.push_back(diff);
    sol.iterates = m + 1;
    if (diff <= opts.tol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "no fixed point after " << opts.m_max << " iterates; last change "
       << sol.differences.back();
    throw Error(ErrorCode::IterationStall, os.str());
  }
  double zmax = 0.0;
  for (const VecXc& v : z) zmax = std::max(zmax, v.cwiseAbs().maxCoeff());
  sol.tail_bound = tail * zmax;
  sol.z = std::move(z);
  return sol;
}

std::vector<VecXc> sample_solution(const PerturbedSystem& sys, double s, const AsymptoticSolution& sol,
                                   const std::vector<double>& y_grid) {
  std::vector<VecXc> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) out.push_back(sol.z_interpolate(sys, s, y) * std::exp(sol.c * sol.mu_k * y));
  return out;
}

double error_bound(const PerturbedSystem& sys, double s, int k, double y, std::optional<double> eps,
                   const LevinsonOptions& opts) {
  const int n = sys.n();
  if (k < 1 || k > n) throw Error(ErrorCode::PreconditionViolated, "k out of range");
  const double c = sys.c(s);
  double e = 0.0;
  if (eps) {
    e = *eps;
  } else {
    double gap = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double d = std::abs(sys.mu()[i] - sys.mu()[j]);
        if (d > kEqualMu && (gap == 0.0 || d < gap)) gap = d;
      }
    }
    e = 0.5 * gap * c;
  }
  const double t0 = sys.t_start();
  const double window = tail_window(sys, opts);
  const double quad = opts.step * 10.0;
  auto integral_from = [&](double a, auto&& f) {
    if (a >= opts.y_max) return tail_estimate(f, a, window, quad);
    return trapezoid(f, a, opts.y_max, quad) + tail_estimate(f, opts.y_max, window, quad);
  };
  const double l1 = integral_from(t0, [&](double y) { return total_abs(sys.r(s, y)); });
  const double lower = std::max(0.5 * y, t0);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double row = integral_from(lower, [&](double y) { return row_abs(sys.r(s, y), i); });
    worst = std::max(worst, std::exp(-e * y) * l1 + 2.0 * row);
  }
  return worst;
}

ContinuityScan parameter_continuity_scan(const PerturbedSystem& sys, const std::vector<double>& s_list,
                                         int k, double y_probe, const LevinsonOptions& opts) {
  ContinuityScan scan;
  scan.s = s_list;
  for (double s : s_list) {
    const AsymptoticSolution sol = iterate_solution(sys, s, k, opts);
    scan.values.push_back(sample_solution(sys, s, sol, {y_probe}).front());
  }
  for (std::size_t i = 0; i + 1 < scan.values.size(); ++i) {
    scan.max_adjacent = std::max(scan.max_adjacent, (scan.values[i + 1] - scan.values[i]).norm());
  }
  return scan;
}

double solution_residual(const PerturbedSystem& sys, double s, const AsymptoticSolution& sol) {
  const int nodes = static_cast<int>(sol.y.size());
  const double h = sol.y[1] - sol.y[0];
  const int n = sys.n();
  double worst = 0.0;
  double scale = 0.0;
  for (const VecXc& v : sol.z) scale = std::max(scale, v.norm());
  // Residual of the scaled system Z' = (c (B - mu_k) + R) Z, fourth-order
  // central differences.
  for (int j = 2; j + 2 < nodes; ++j) {
    const VecXc dz = (-sol.z[j + 2] + 8.0 * sol.z[j + 1] - 8.0 * sol.z[j - 1] + sol.z[j - 2]) / (12.0 * h);
    MatXc a = sys.r(s, sol.y[j]);
    for (int i = 0; i < n; ++i) a(i, i) += sol.c * (sys.mu()[i] - sol.mu_k);
    worst = std::max(worst, (dz - a * sol.z[j]).norm());
  }
  return scale > 0.0 ? worst / scale : worst;
}

double basis_condition(const PerturbedSystem& sys, double s, const LevinsonOptions& opts) {
  const int n = sys.n();
  MatXc m(n, n);
  // Columns scaled by e^{-c mu_k T}; scaling does not affect independence.
  for (int k = 1; k <= n; ++k) m.col(k - 1) = iterate_solution(sys, s, k, opts).z.front().normalized();
  Eigen::JacobiSVD<MatXc> svd(m);
  const auto& sv = svd.singularValues();
  return sv[n - 1] > 0.0 ? sv[0] / sv[n - 1] : std::numeric_limits<double>::infinity();
}

PerturbedSystem ray_system(std::shared_ptr<const TransportField> field, cplx residue, double iota) {
  if (residue == cplx(0.0)) throw Error(ErrorCode::ZeroResidue, "ray system needs R != 0");
  if (!(iota > 0.0 && iota < kPi)) throw Error(ErrorCode::PreconditionViolated, "iota must lie in (0, pi)");
  const double psi = std::log(std::cbrt(2.0) * std::pow(std::abs(residue), 2.0 / 3.0));
  const FrameCoefficients lim = frame_coefficients(psi, cplx(0.0), cylinder_coefficient(residue));
  const double ci = std::cos(iota);
  const double si = std::sin(iota);
  const Mat3c m_inf = ci * lim.ax + si * lim.ay;
  const cplx scale = model_coordinate_scale(residue);
  const Mat3c p = initial_frame(psi, scale / std::abs(scale)).rows;
  const Mat3c d = p.inverse() * m_inf * p;
  Mat3c off = d;
  off.diagonal().setZero();
  if (off.norm() > 1e-9 * (1.0 + d.norm())) {
    throw Error(ErrorCode::PreconditionViolated, "model direction matrix not diagonal in the frame basis");
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return d(a, a).real() > d(b, b).real(); });
  Mat3c pp;
  std::vector<double> mu(3);
  for (int k = 0; k < 3; ++k) {
    pp.col(k) = p.col(order[k]);
    mu[k] = d(order[k], order[k]).real();
  }
  const Mat3c ppi = pp.inverse();
  const double base = field->base_y();
  auto term = [field, m_inf, pp, ppi, ci, si, base](double s, double r) -> MatXc {
    const FrameCoefficients fc = field->at(r * ci, base + r * si);
    const Mat3c m = ci * fc.ax + si * fc.ay;
    return MatXc(s * (ppi * (m - m_inf) * pp));
  };
  return PerturbedSystem([](double) { return 1.0; }, std::move(mu), term, 0.0);
}

void write_solution_csv(std::ostream& os, const AsymptoticSolution& sol) {
  os << "y";
  const int n = sol.z.empty() ? 0 : static_cast<int>(sol.z.front().size());
  for (int i = 1; i <= n; ++i) os << ",z" << i << "_re,z" << i << "_im";
  os << "\n" << std::setprecision(17);
  for (std::size_t j = 0; j < sol.y.size(); ++j) {
    os << sol.y[j];
    for (int i = 0; i < n; ++i) os << "," << sol.z[j][i].real() << "," << sol.z[j][i].imag();
    os << "\n";
  }
}

}  // namespace rp2ends
