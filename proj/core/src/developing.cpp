#include "rp2ends/developing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string_view>

#include <Eigen/Dense>

#include "rp2ends/error.hpp"

namespace rp2ends {

namespace {

const cplx kI(0.0, 1.0);
const cplx kOmega(-0.5, 0.86602540378443864676);

Mat3c omega_matrix() {
  Mat3c m;
  const cplx w = kOmega;
  const cplx w2 = kOmega * kOmega;
  m << 1.0, 1.0, 1.0, 1.0, w2, w, 1.0, w, w2;
  return m;
}

// Rows (f, f_w, f_wbar) -> (f, f_x, f_y).
Mat3c real_basis() {
  Mat3c t;
  t << 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, kI, -kI;
  return t;
}

Mat3c real_basis_inverse() {
  Mat3c t;
  t << 1.0, 0.0, 0.0, 0.0, 0.5, -0.5 * kI, 0.0, 0.5, 0.5 * kI;
  return t;
}

cplx det_extended(const Mat3c& m) {
  using Q = __float128;
  struct C {
    Q re;
    Q im;
  };
  auto e = [&](int i, int j) { return C{static_cast<Q>(m(i, j).real()), static_cast<Q>(m(i, j).imag())}; };
  auto mul = [](C a, C b) { return C{a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re}; };
  auto sub = [](C a, C b) { return C{a.re - b.re, a.im - b.im}; };
  auto add = [](C a, C b) { return C{a.re + b.re, a.im + b.im}; };
  const C d = add(sub(mul(e(0, 0), sub(mul(e(1, 1), e(2, 2)), mul(e(1, 2), e(2, 1)))),
                      mul(e(0, 1), sub(mul(e(1, 0), e(2, 2)), mul(e(1, 2), e(2, 0))))),
                  mul(e(0, 2), sub(mul(e(1, 0), e(2, 1)), mul(e(1, 1), e(2, 0)))));
  return cplx(static_cast<double>(d.re), static_cast<double>(d.im));
}

void check_step(double step) {
  if (!(step > 0.0) || step > kMaxStep) {
    std::ostringstream os;
    os << "step " << step << " outside (0, " << kMaxStep << "]";
    throw Error(ErrorCode::StepTooLarge, os.str());
  }
}

Mat3c direction_matrix(const FrameCoefficients& c, double dx, double dy) {
  return dx * c.ax + dy * c.ay;
}

struct StepResult {
  Mat3c x;
  double psi_end = 0.0;
};

// One classical RK4 step along (dx, dy); the adjoint system Y' = -Y B
// propagates the inverse.
StepResult rk4_step(const TransportField& f, const Mat3c& x, double px, double py, double dx,
                    double dy, double h, bool adjoint) {
  const FrameCoefficients c0 = f.at(px, py);
  const FrameCoefficients cm = f.at(px + 0.5 * h * dx, py + 0.5 * h * dy);
  const FrameCoefficients c1 = f.at(px + h * dx, py + h * dy);
  const Mat3c b0 = direction_matrix(c0, dx, dy);
  const Mat3c bm = direction_matrix(cm, dx, dy);
  const Mat3c b1 = direction_matrix(c1, dx, dy);
  auto rhs = [adjoint](const Mat3c& b, const Mat3c& y) -> Mat3c {
    return adjoint ? Mat3c(-(y * b)) : Mat3c(b * y);
  };
  const Mat3c k1 = rhs(b0, x);
  const Mat3c k2 = rhs(bm, x + 0.5 * h * k1);
  const Mat3c k3 = rhs(bm, x + 0.5 * h * k2);
  const Mat3c k4 = rhs(b1, x + h * k3);
  return {x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), c1.psi};
}

void check_inside(const TransportField& f, double x, double y) {
  if (!f.contains(x, y)) {
    std::ostringstream os;
    os << "point (" << x << ", " << y << ") outside " << f.describe();
    throw Error(ErrorCode::FieldDomainError, os.str());
  }
}

template <class Visit>
Mat3c propagate(const TransportField& f, const Path& path, double step, Mat3c x, bool adjoint,
                Visit&& visit) {
  check_step(step);
  for (const auto& [px, py] : path) check_inside(f, px, py);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto [x0, y0] = path[k];
    const auto [x1, y1] = path[k + 1];
    const double len = std::hypot(x1 - x0, y1 - y0);
    if (len == 0.0) continue;
    const int n = static_cast<int>(std::ceil(len / step - 1e-9));
    const double h = len / n;
    const double dx = (x1 - x0) / len;
    const double dy = (y1 - y0) / len;
    for (int s = 0; s < n; ++s) {
      const StepResult r = rk4_step(f, x, x0 + s * h * dx, y0 + s * h * dy, dx, dy, h, adjoint);
      x = r.x;
      visit(x, r.psi_end);
    }
  }
  return x;
}

struct Eigenpairs {
  std::array<cplx, 3> values;  // descending real part
};

Eigenpairs sorted_eigenpairs(const Mat3& m) {
  Eigen::EigenSolver<Mat3> es(m, false);
  Eigenpairs e;
  for (int i = 0; i < 3; ++i) e.values[i] = es.eigenvalues()[i];
  std::sort(e.values.begin(), e.values.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
  return e;
}

bool distinct_real_positive(const Eigenpairs& e) {
  for (const cplx& v : e.values) {
    if (!(v.real() > 0.0) || std::abs(v.imag()) > 1e-9 * std::abs(v)) return false;
  }
  for (int i = 0; i + 1 < 3; ++i) {
    const double a = e.values[i].real();
    const double b = e.values[i + 1].real();
    if ((a - b) < 1e-6 * a) return false;
  }
  return true;
}

using LMat3c = Eigen::Matrix<std::complex<long double>, 3, 3>;

LMat3c widen(const Mat3c& m) { return m.cast<std::complex<long double>>(); }

// Forward monodromy in long double: the recessive eigencomponent is
// ~1e-9 of the entries, below what a double solve can keep.
LMat3c monodromy_extended(const TransportField& f, const Path& path, double step) {
  check_step(step);
  for (const auto& [px, py] : path) check_inside(f, px, py);
  LMat3c x = LMat3c::Identity();
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto [x0, y0] = path[k];
    const auto [x1, y1] = path[k + 1];
    const double len = std::hypot(x1 - x0, y1 - y0);
    if (len == 0.0) continue;
    const int n = static_cast<int>(std::ceil(len / step - 1e-9));
    const long double h = static_cast<long double>(len) / n;
    const double dx = (x1 - x0) / len;
    const double dy = (y1 - y0) / len;
    const double hd = len / n;
    for (int s = 0; s < n; ++s) {
      const double px = x0 + s * hd * dx;
      const double py = y0 + s * hd * dy;
      const LMat3c b0 = widen(direction_matrix(f.at(px, py), dx, dy));
      const LMat3c bm = widen(direction_matrix(f.at(px + 0.5 * hd * dx, py + 0.5 * hd * dy), dx, dy));
      const LMat3c b1 = widen(direction_matrix(f.at(px + hd * dx, py + hd * dy), dx, dy));
      const LMat3c k1 = b0 * x;
      const LMat3c k2 = bm * (x + (h / 2) * k1);
      const LMat3c k3 = bm * (x + (h / 2) * k2);
      const LMat3c k4 = b1 * (x + h * k3);
      x += (h / 6) * (k1 + 2.0L * k2 + 2.0L * k3 + k4);
    }
  }
  return x;
}

double det_quad(const LMat3c& m) {
  using Q = __float128;
  auto e = [&](int i, int j) { return static_cast<Q>(m(i, j).real()); };
  const Q d = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) -
              e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)) +
              e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
  return static_cast<double>(d);
}

// Dominant eigenvalues from the forward matrix, the contracting one from
// the adjoint solve.
HolonomyLoop finish_holonomy(const LMat3c& phi, const Mat3c& psi) {
  const LMat3c t = widen(real_basis());
  const LMat3c ti = widen(real_basis_inverse());
  const LMat3c hl = t * phi * ti;
  const double raw = det_quad(hl);
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    std::ostringstream os;
    os << "integrated holonomy has det " << raw;
    throw Error(ErrorCode::NotUnimodular, os.str());
  }
  HolonomyLoop out;
  out.raw_det = raw;
  out.h = hl.real().cast<double>();
  out.h_inverse = (real_basis() * psi * real_basis_inverse()).real();
  const Eigenpairs a = sorted_eigenpairs(out.h);
  const Eigenpairs b = sorted_eigenpairs(out.h_inverse);
  if (distinct_real_positive(a) && distinct_real_positive(b)) {
    out.eigenvalues = {a.values[0].real(), std::sqrt(a.values[1].real() / b.values[1].real()),
                       1.0 / b.values[0].real()};
  } else {
    for (int i = 0; i < 3; ++i) out.eigenvalues[i] = a.values[i].real();
  }
  return out;
}

HolonomyLoop holonomy_along(const TransportField& field, const Path& path, double step) {
  auto none = [](const Mat3c&, double) {};
  const LMat3c phi = monodromy_extended(field, path, step);
  const Mat3c psi = propagate(field, path, step, Mat3c::Identity(), true, none);
  return finish_holonomy(phi, psi);
}

}  // namespace

// Hermite bicubic on a grid periodic in x, with centred-difference slopes.
class PeriodicBicubic {
 public:
  PeriodicBicubic(const CylinderGrid& g, std::vector<double> values)
      : nx_(g.nx()), ny_(g.ny()), y0_(g.y0()), hx_(g.hx()), hy_(g.hy()), f_(std::move(values)) {
    const std::size_t n = f_.size();
    fx_.assign(n, 0.0);
    fy_.assign(n, 0.0);
    fxy_.assign(n, 0.0);
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        fx_[idx(i, j)] = (f_[idx(i + 1, j)] - f_[idx(i - 1, j)]) / (2.0 * hx_);
        fy_[idx(i, j)] = dy(f_, i, j);
      }
    }
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        fxy_[idx(i, j)] = (fy_[idx(i + 1, j)] - fy_[idx(i - 1, j)]) / (2.0 * hx_);
      }
    }
  }

  struct Value {
    double f = 0.0;
    double fx = 0.0;
    double fy = 0.0;
  };

  Value operator()(double x, double y) const {
    double cx = x / hx_;
    double fl = std::floor(cx);
    int i = static_cast<int>(fl);
    const double t = cx - fl;
    double cy = (y - y0_) / hy_;
    int j = static_cast<int>(std::floor(cy));
    j = std::clamp(j, 0, ny_ - 2);
    const double s = cy - j;

    const double a[2] = {2 * t * t * t - 3 * t * t + 1, -2 * t * t * t + 3 * t * t};
    const double b[2] = {t * t * t - 2 * t * t + t, t * t * t - t * t};
    const double da[2] = {6 * t * t - 6 * t, -6 * t * t + 6 * t};
    const double db[2] = {3 * t * t - 4 * t + 1, 3 * t * t - 2 * t};
    const double as[2] = {2 * s * s * s - 3 * s * s + 1, -2 * s * s * s + 3 * s * s};
    const double bs[2] = {s * s * s - 2 * s * s + s, s * s * s - s * s};
    const double das[2] = {6 * s * s - 6 * s, -6 * s * s + 6 * s};
    const double dbs[2] = {3 * s * s - 4 * s + 1, 3 * s * s - 2 * s};

    Value v;
    for (int p = 0; p < 2; ++p) {
      for (int q = 0; q < 2; ++q) {
        const int n = idx(i + p, j + q);
        const double c0 = f_[n];
        const double c1 = hx_ * fx_[n];
        const double c2 = hy_ * fy_[n];
        const double c3 = hx_ * hy_ * fxy_[n];
        v.f += c0 * a[p] * as[q] + c1 * b[p] * as[q] + c2 * a[p] * bs[q] + c3 * b[p] * bs[q];
        v.fx += c0 * da[p] * as[q] + c1 * db[p] * as[q] + c2 * da[p] * bs[q] + c3 * db[p] * bs[q];
        v.fy += c0 * a[p] * das[q] + c1 * b[p] * das[q] + c2 * a[p] * dbs[q] + c3 * b[p] * dbs[q];
      }
    }
    v.fx /= hx_;
    v.fy /= hy_;
    return v;
  }

 private:
  int idx(int i, int j) const { return j * nx_ + (((i % nx_) + nx_) % nx_); }

  double dy(const std::vector<double>& f, int i, int j) const {
    if (j == 0) return (-3.0 * f[idx(i, 0)] + 4.0 * f[idx(i, 1)] - f[idx(i, 2)]) / (2.0 * hy_);
    if (j == ny_ - 1) {
      return (3.0 * f[idx(i, j)] - 4.0 * f[idx(i, j - 1)] + f[idx(i, j - 2)]) / (2.0 * hy_);
    }
    return (f[idx(i, j + 1)] - f[idx(i, j - 1)]) / (2.0 * hy_);
  }

  int nx_;
  int ny_;
  double y0_;
  double hx_;
  double hy_;
  std::vector<double> f_;
  std::vector<double> fx_;
  std::vector<double> fy_;
  std::vector<double> fxy_;
};

FrameDrift frame_drift(const AffineFrame& frame) {
  const Mat3c& r = frame.rows;
  FrameDrift d;
  const double n0 = r.row(0).norm();
  const double n1 = r.row(1).norm();
  if (n0 > 0.0) d.reality = r.row(0).imag().norm() / n0;
  if (n1 > 0.0) d.conjugacy = (r.row(2) - r.row(1).conjugate()).norm() / n1;
  const cplx expected = 0.5 * kI * std::exp(frame.psi_at);
  d.volume = std::abs(det_extended(r) / expected - 1.0);
  return d;
}

FrameCoefficients frame_coefficients(double psi, cplx psi_w, cplx u) {
  const double half_e = 0.5 * std::exp(psi);
  const cplx ue = u * std::exp(-psi);
  const cplx psi_wbar = std::conj(psi_w);
  FrameCoefficients c;
  c.psi = psi;
  c.ax << 0.0, 1.0, 1.0, half_e, psi_w, ue, half_e, std::conj(ue), psi_wbar;
  c.ay << 0.0, kI, -kI, -kI * half_e, kI * psi_w, kI * ue, kI * half_e, -kI * std::conj(ue),
      -kI * psi_wbar;
  return c;
}

ConstantField::ConstantField(double psi, cplx u, double base_y) : psi_(psi), u_(u), base_y_(base_y) {
  if (!std::isfinite(psi)) throw Error(ErrorCode::DomainError, "psi must be finite");
}

ConstantField ConstantField::model_end(cplx residue, double base_y) {
  if (residue == cplx(0.0)) throw Error(ErrorCode::ZeroResidue, "model end needs R != 0");
  const double psi = std::log(std::cbrt(2.0) * std::pow(std::abs(residue), 2.0 / 3.0));
  return ConstantField(psi, cylinder_coefficient(residue), base_y);
}

ConstantField ConstantField::triangle_model() { return ConstantField(std::log(2.0), cplx(2.0, 0.0)); }

FrameCoefficients ConstantField::at(double, double) const {
  return frame_coefficients(psi_, cplx(0.0), u_);
}

std::string ConstantField::describe() const {
  std::ostringstream os;
  os << "constant field (psi = " << psi_ << ", U = " << u_.real() << (u_.imag() < 0 ? "" : "+")
     << u_.imag() << "i)";
  return os.str();
}

MatrixField::MatrixField(Mat3c ax, Mat3c ay) {
  c_.ax = std::move(ax);
  c_.ay = std::move(ay);
}

FrameCoefficients MatrixField::at(double, double) const { return c_; }

GridField::GridField(CylinderGrid grid, bool extend_above)
    : grid_(std::move(grid)), extend_above_(extend_above) {
  grid_.validate();
  u_ = std::make_shared<PeriodicBicubic>(grid_, grid_.u);
  if (!grid_.background()) {
    phi_ = std::make_shared<PeriodicBicubic>(grid_, grid_.phi);
    std::vector<double> re(grid_.size());
    std::vector<double> im(grid_.size());
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      re[k] = grid_.U[k].real();
      im[k] = grid_.U[k].imag();
    }
    u_re_ = std::make_shared<PeriodicBicubic>(grid_, std::move(re));
    u_im_ = std::make_shared<PeriodicBicubic>(grid_, std::move(im));
  }
}

bool GridField::contains(double, double y) const {
  const double slack = 1e-12 * (1.0 + std::abs(grid_.y1()));
  if (y < grid_.y0() - slack) return false;
  if (extend_above_) return true;
  return y <= grid_.y1() + slack;
}

GridField::Sample GridField::interpolate(double x, double y) const {
  if (y > grid_.y1()) {
    if (extend_above_) return {};
  }
  const PeriodicBicubic::Value v = (*u_)(x, y);
  return {v.f, v.fx, v.fy};
}

FrameCoefficients GridField::at(double x, double y) const {
  if (!contains(x, y)) {
    std::ostringstream os;
    os << "point (" << x << ", " << y << ") outside " << describe();
    throw Error(ErrorCode::FieldDomainError, os.str());
  }
  const Sample s = interpolate(x, y);
  double phi = 0.0;
  double phi_y = 0.0;
  cplx u;
  if (const auto& bg = grid_.background()) {
    phi = bg->phi(y);
    phi_y = bg->phi_y(y);
    u = bg->U(x, y);
  } else {
    const double yc = std::min(y, grid_.y1());
    const PeriodicBicubic::Value p = (*phi_)(x, yc);
    phi = p.f;
    phi_y = p.fy;
    u = cplx((*u_re_)(x, yc).f, (*u_im_)(x, yc).f);
  }
  const cplx psi_w = 0.5 * cplx(s.ux, -(phi_y + s.uy));
  return frame_coefficients(phi + s.u, psi_w, u);
}

std::string GridField::describe() const {
  std::ostringstream os;
  os << "grid field on y in [" << grid_.y0() << ", " << grid_.y1() << "]"
     << (extend_above_ ? " extended above" : "");
  return os.str();
}

CutoffField::CutoffField(std::shared_ptr<const TransportField> inner,
                         std::shared_ptr<const TransportField> outer, double y_cut)
    : inner_(std::move(inner)), outer_(std::move(outer)), y_cut_(y_cut) {}

FrameCoefficients CutoffField::at(double x, double y) const {
  return y <= y_cut_ ? inner_->at(x, y) : outer_->at(x, y);
}

bool CutoffField::contains(double x, double y) const {
  return y <= y_cut_ ? inner_->contains(x, y) : outer_->contains(x, y);
}

std::string CutoffField::describe() const {
  std::ostringstream os;
  os << "cutoff at y = " << y_cut_ << " of {" << inner_->describe() << "} below {"
     << outer_->describe() << "}";
  return os.str();
}

AffineFrame initial_frame(double psi0, cplx phase) {
  const double s = std::sqrt(0.5 * std::exp(psi0));
  Mat3c m = omega_matrix() / std::sqrt(3.0);
  m.row(1) *= s * phase;
  m.row(2) *= s * std::conj(phase);
  return {m, psi0};
}

AffineFrame triangle_model_frame(double sigma, double tau) {
  const double r3 = std::sqrt(3.0);
  Eigen::Vector3d d(std::exp(2.0 * sigma), std::exp(-sigma + r3 * tau), std::exp(-sigma - r3 * tau));
  Mat3c m = omega_matrix() / r3;
  for (int c = 0; c < 3; ++c) m.col(c) *= d[c];
  return {m, std::log(2.0)};
}

TransportResult transport(const AffineFrame& frame, const TransportField& field, const Path& path,
                          double step, bool keep_trajectory) {
  TransportResult out;
  out.frame = frame;
  out.max_drift = frame_drift(frame);
  if (keep_trajectory) out.trajectory.push_back(frame);
  auto visit = [&](const Mat3c& x, double psi) {
    const AffineFrame f{x, psi};
    const FrameDrift d = frame_drift(f);
    out.max_drift.reality = std::max(out.max_drift.reality, d.reality);
    out.max_drift.conjugacy = std::max(out.max_drift.conjugacy, d.conjugacy);
    out.max_drift.volume = std::max(out.max_drift.volume, d.volume);
    if (keep_trajectory) out.trajectory.push_back(f);
    out.frame = f;
  };
  propagate(field, path, step, frame.rows, false, visit);
  return out;
}

double volume_drift(const std::vector<AffineFrame>& trajectory) {
  if (trajectory.empty()) throw Error(ErrorCode::PreconditionViolated, "empty trajectory");
  double m = 0.0;
  for (const AffineFrame& f : trajectory) m = std::max(m, frame_drift(f).volume);
  return m;
}

HolonomyLoop holonomy_loop_report(const TransportField& field, double y, double step) {
  return holonomy_along(field, {{0.0, y}, {kTwoPi, y}}, step);
}

UnimodularMatrix holonomy_loop(const TransportField& field, double y, double step) {
  return UnimodularMatrix(holonomy_loop_report(field, y, step).h);
}

HolonomyLoop holonomy_rectangle(const TransportField& field, double y, double y_top, double step) {
  return holonomy_along(field, {{0.0, y}, {0.0, y_top}, {kTwoPi, y_top}, {kTwoPi, y}}, step);
}

Mat3c limit_matrix(cplx residue) {
  Mat3c a = Mat3c::Zero();
  a(0, 1) = 1.0;
  a(0, 2) = 1.0;
  const double r = std::abs(residue);
  if (r == 0.0) return a;
  const double k = std::pow(2.0, -2.0 / 3.0) * std::pow(r, 2.0 / 3.0);
  const double m = std::pow(2.0, -1.0 / 3.0) * std::pow(r, -2.0 / 3.0);
  a(1, 0) = k;
  a(2, 0) = k;
  a(1, 2) = -kI * m * residue;
  a(2, 1) = kI * m * std::conj(residue);
  return a;
}

Mat3c model_end_matrix(cplx residue) { return limit_matrix(residue).conjugate(); }

Mat3 developing_action(const Mat3& h_real, const AffineFrame& base) {
  const Mat3 y0 = (real_basis() * base.rows).real();
  const Mat3 g = y0.fullPivLu().solve(h_real * y0);
  Mat3 m = g.transpose();
  const double d = determinant_extended(m);
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw Error(ErrorCode::NotUnimodular, "developing action has non-positive determinant");
  }
  return m / std::cbrt(d);
}

DevelopedCurve develop_ray_from(const TransportField& field, const AffineFrame& frame0, double x0,
                                double y0, double theta, double y_max, const RayOptions& opts) {
  check_step(opts.step);
  if (!(opts.sample_spacing > 0.0) || opts.window < 2) {
    throw Error(ErrorCode::PreconditionViolated, "bad ray sampling options");
  }
  check_inside(field, x0, y0);
  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  const int sub = static_cast<int>(std::ceil(opts.sample_spacing / opts.step - 1e-9));
  const double h = opts.sample_spacing / sub;

  DevelopedCurve curve;
  Mat3c x = frame0.rows;
  double s = 0.0;
  auto record = [&]() {
    curve.samples.emplace_back(s, project(x.row(0).real().transpose()));
    const int n = static_cast<int>(curve.samples.size());
    if (n < opts.window) return false;
    for (int a = n - opts.window; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (chart_distance(curve.samples[a].second, curve.samples[b].second) > opts.cauchy_tol) {
          return false;
        }
      }
    }
    return true;
  };
  if (record()) {
    curve.limit = curve.samples.back().second;
    return curve;
  }
  while (true) {
    for (int k = 0; k < sub; ++k) {
      x = rk4_step(field, x, x0 + s * dx, y0 + s * dy, dx, dy, h, false).x;
      s += h;
    }
    const double nrm = x.norm();
    if (nrm > 1e100 || nrm < 1e-100) x /= nrm;
    if (record()) {
      curve.limit = curve.samples.back().second;
      return curve;
    }
    const double y = y0 + s * dy;
    if ((dy > 1e-12 && y >= y_max) || s >= opts.max_length) {
      std::ostringstream os;
      os << "ray at angle " << theta << " not Cauchy after length " << s << " (y = " << y << ")";
      throw Error(ErrorCode::NoConvergenceByYmax, os.str());
    }
  }
}

DevelopedCurve develop_ray(const TransportField& field, double iota, double y_max, double step,
                           cplx phase) {
  if (!(iota > 0.0 && iota < kPi)) {
    throw Error(ErrorCode::PreconditionViolated, "iota must lie in (0, pi)");
  }
  const double base = field.base_y();
  if (!(y_max > base)) throw Error(ErrorCode::PreconditionViolated, "y_max below the base point");
  const AffineFrame f0 = initial_frame(field.at(0.0, base).psi, phase);
  RayOptions opts;
  opts.step = step;
  opts.max_length = std::max(opts.max_length, (y_max - base) / std::sin(iota) + 1.0);
  return develop_ray_from(field, f0, 0.0, base, iota, y_max, opts);
}

namespace {

TwistWitness witness(const PrincipalTriangle& tri, double iota, const ProjPoint& limit,
                     const std::vector<TriangleEdge>& allowed, double tol) {
  TwistWitness w;
  w.iota = iota;
  w.limit = limit;
  w.triangle_coordinates = tri.coordinates(limit.coords());
  double best = 1e300;
  for (TriangleEdge e : allowed) {
    const double d = tri.distance_to_edge_line(limit, e);
    if (d < best) {
      best = d;
      w.edge = e;
    }
  }
  w.distance_to_edge = best;
  w.distance_to_vertices = tri.distance_to_edge_ends(limit, w.edge);
  if (!(best <= tol) || !(w.distance_to_vertices > 10.0 * kWitnessTol)) {
    std::ostringstream os;
    os << "ray at iota = " << iota << " has limit at distance " << best << " from "
       << edge_name(w.edge) << " and " << w.distance_to_vertices << " from its vertices";
    throw Error(ErrorCode::InconsistentWitness, os.str());
  }
  return w;
}

}  // namespace

TwistEvidence detect_twist(const TransportField& field, cplx residue, const TwistOptions& opts) {
  if (residue.real() == 0.0) {
    throw Error(ErrorCode::PreconditionViolated, "twist detection needs Re R != 0");
  }
  TwistEvidence ev;
  ev.sign = twist_sign(residue);
  if (ev.sign == TwistSign::Undefined) {
    throw Error(ErrorCode::PreconditionViolated, "twist sign undefined for this residue");
  }
  const cplx c = model_coordinate_scale(residue);
  const cplx phase = c / std::abs(c);
  const double base = field.base_y();
  ev.base_frame = initial_frame(field.at(0.0, base).psi, phase);

  const HolonomyLoop loop = opts.loop_y ? holonomy_rectangle(field, base, *opts.loop_y, opts.step)
                                        : holonomy_loop_report(field, base, opts.step);
  ev.action = developing_action(loop.h, ev.base_frame);
  const Vec3 hint = ev.base_frame.rows.row(0).real().transpose();
  ev.triangle = principal_triangle(UnimodularMatrix(ev.action), hint);

  const double arg_xi = std::arg(xi_branch(residue));
  const double iota = kPi / 3.0 - arg_xi;
  auto judge = [&](double angle, const std::vector<TriangleEdge>& allowed) {
    const DevelopedCurve curve = develop_ray(field, angle, opts.y_max, opts.step, phase);
    return witness(ev.triangle, angle, *curve.limit, allowed, opts.witness_tol);
  };
  if (ev.sign == TwistSign::PlusInfinity) {
    const double iota_hat = kPi - arg_xi;
    const std::vector<TriangleEdge> allowed{TriangleEdge::PlusZero, TriangleEdge::ZeroMinus};
    ev.witnesses.push_back(judge(iota, allowed));
    ev.witnesses.push_back(judge(iota_hat, allowed));
    if (ev.witnesses[0].edge == ev.witnesses[1].edge) {
      throw Error(ErrorCode::InconsistentWitness,
                  std::string("both rays land on ") + std::string(edge_name(ev.witnesses[0].edge)));
    }
  } else {
    ev.witnesses.push_back(judge(iota, {TriangleEdge::PlusMinus}));
  }
  return ev;
}

std::string_view limit_row_name(LimitRow r) {
  switch (r) {
    case LimitRow::V1: return "v1";
    case LimitRow::SegmentV1V2: return "segment v1v2";
    case LimitRow::V2: return "v2";
    case LimitRow::SegmentV2V3: return "segment v2v3";
    case LimitRow::V3: return "v3";
    case LimitRow::SegmentV3V1: return "segment v3v1";
  }
  return "?";
}

LimitRow predicted_limit_row(double theta, double tol) {
  // Shift by pi/3 so that v1's open sector starts at 0.
  double a = std::fmod(theta + kPi / 3.0, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  const double k = a / (kPi / 3.0);
  const double nearest = 2.0 * std::round(0.5 * k);
  if (std::abs(k - nearest) * (kPi / 3.0) <= tol) {
    const int j = static_cast<int>(nearest) % 6;  // 0: theta = -pi/3
    static constexpr std::array<LimitRow, 3> kSeg{LimitRow::SegmentV3V1, LimitRow::SegmentV1V2,
                                                  LimitRow::SegmentV2V3};
    return kSeg[(j / 2) % 3];
  }
  static constexpr std::array<LimitRow, 3> kVert{LimitRow::V1, LimitRow::V2, LimitRow::V3};
  return kVert[(static_cast<int>(std::floor(k)) / 2) % 3];
}

std::optional<LimitRow> match_limit_row(const ProjPoint& p, double tol) {
  static constexpr std::array<LimitRow, 3> kVert{LimitRow::V1, LimitRow::V2, LimitRow::V3};
  static constexpr std::array<LimitRow, 3> kSeg{LimitRow::SegmentV2V3, LimitRow::SegmentV3V1,
                                                LimitRow::SegmentV1V2};
  for (int i = 0; i < 3; ++i) {
    if (chart_distance(p, project(Vec3::Unit(i))) <= tol) return kVert[i];
  }
  for (int k = 0; k < 3; ++k) {
    const double a = p[(k + 1) % 3];
    const double b = p[(k + 2) % 3];
    if (std::abs(p[k]) <= tol && a * b > 0.0) return kSeg[k];
  }
  return std::nullopt;
}

DevelopedCurve develop_model_ray(double theta, double step) {
  const ConstantField field = ConstantField::triangle_model();
  RayOptions opts;
  opts.step = step;
  return develop_ray_from(field, initial_frame(std::log(2.0)), 0.0, 0.0, theta, 1e300, opts);
}

void write_curve_csv(std::ostream& os, const DevelopedCurve& curve) {
  os << "parameter,p1,p2,p3\n" << std::setprecision(17);
  for (const auto& [s, p] : curve.samples) {
    os << s << "," << p[0] << "," << p[1] << "," << p[2] << "\n";
  }
}

int write_curve_svg(std::ostream& os, const DevelopedCurve& curve,
                    const std::optional<PrincipalTriangle>& triangle) {
  constexpr double kBox = 10.0;
  constexpr double kSize = 600.0;
  int clipped = 0;
  auto chart = [](const Vec3& p, double& u, double& v) {
    if (std::abs(p[0]) < 1e-12) return false;
    u = p[1] / p[0];
    v = p[2] / p[0];
    return std::abs(u) <= kBox && std::abs(v) <= kBox;
  };
  auto px = [](double u) { return (u + kBox) / (2.0 * kBox) * kSize; };
  auto py = [](double v) { return kSize - (v + kBox) / (2.0 * kBox) * kSize; };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<Vec3>& pts, const char* colour, bool count) {
    std::ostringstream piece;
    int len = 0;
    auto flush = [&]() {
      if (len > 1) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\""
           << piece.str() << "\"/>\n";
      }
      piece.str("");
      len = 0;
    };
    for (const Vec3& p : pts) {
      double u = 0.0;
      double v = 0.0;
      if (chart(p, u, v)) {
        piece << px(u) << "," << py(v) << " ";
        ++len;
      } else {
        if (count) ++clipped;
        flush();
      }
    }
    flush();
  };
  if (triangle) {
    for (int e = 0; e < 3; ++e) {
      const Vec3 a = triangle->basis.col(e);
      const Vec3 b = triangle->basis.col((e + 1) % 3);
      std::vector<Vec3> pts;
      for (int k = 0; k <= 400; ++k) {
        const double t = k / 400.0;
        pts.push_back((1.0 - t) * a + t * b);
      }
      polyline(pts, "#888888", false);
    }
  }
  std::vector<Vec3> pts;
  for (const auto& sample : curve.samples) pts.push_back(sample.second.coords());
  polyline(pts, "#1f4e9c", true);
  if (curve.limit) {
    double u = 0.0;
    double v = 0.0;
    if (chart(curve.limit->coords(), u, v)) {
      os << "<circle cx=\"" << px(u) << "\" cy=\"" << py(v) << "\" r=\"4\" fill=\"#c0392b\"/>\n";
    }
  }
  os << "</svg>\n";
  return clipped;
}

}  // namespace rp2ends
