#include "rp2ends/model_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rp2ends/error.hpp"

namespace rp2ends {

namespace {

RadialJet cusp_jet(double s) {
  return {-2.0 * std::log(-s), -2.0 / s, 2.0 / (s * s)};
}

RadialJet flat_jet(double r_abs) {
  return {std::log(std::cbrt(2.0) * std::pow(r_abs, 2.0 / 3.0)), 0.0, 0.0};
}

// Blend a -> b with weight h(t), t = (s - s0) * dt_ds.
RadialJet blend(const RadialJet& a, const RadialJet& b, double t, double dt_ds) {
  const Smoothstep w = smoothstep(t);
  const double h1 = w.h1 * dt_ds;
  const double h2 = w.h2 * dt_ds * dt_ds;
  RadialJet out;
  out.g = (1.0 - w.h) * a.g + w.h * b.g;
  out.g1 = (1.0 - w.h) * a.g1 + w.h * b.g1 + h1 * (b.g - a.g);
  out.g2 = (1.0 - w.h) * a.g2 + w.h * b.g2 + 2.0 * h1 * (b.g1 - a.g1) + h2 * (b.g - a.g);
  return out;
}

std::string format_point(cplx z) {
  std::ostringstream os;
  os << "(" << z.real() << ", " << z.imag() << ")";
  return os.str();
}

}  // namespace

Smoothstep smoothstep(double t) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {t3 * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - t) * (1.0 - t),
          60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)};
}

CubicLaurent::CubicLaurent(std::map<int, cplx> coeffs, int truncation)
    : coeffs_(std::move(coeffs)), truncation_(truncation) {
  for (const auto& [m, a] : coeffs_) {
    if (m < -3) throw Error(ErrorCode::DomainError, "pole order exceeds 3");
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
      throw Error(ErrorCode::DomainError, "non-finite Laurent coefficient");
    }
  }
  if (truncation_ < -3) throw Error(ErrorCode::DomainError, "truncation below -3");
}

CubicLaurent CubicLaurent::pure(cplx residue) { return CubicLaurent({{-3, residue}}); }

cplx CubicLaurent::coefficient(int m) const {
  const auto it = coeffs_.find(m);
  return it == coeffs_.end() ? cplx(0.0, 0.0) : it->second;
}

cplx CubicLaurent::evaluate_times_z3(cplx z) const {
  cplx sum = 0.0;
  for (const auto& [m, a] : coeffs_) {
    if (m > truncation_) break;
    sum += a * std::pow(z, m + 3);
  }
  return sum;
}

cplx CubicLaurent::evaluate(cplx z) const {
  if (z == cplx(0.0, 0.0)) throw Error(ErrorCode::ZeroPoint, "Laurent series at the puncture");
  return evaluate_times_z3(z) / (z * z * z);
}

cplx cylinder_point(double x, double y) { return std::exp(cplx(-y, -x)); }

cplx cylinder_coefficient(cplx z3u) { return cplx(0.0, 1.0) * std::conj(z3u); }

cplx cylinder_differential(const CubicLaurent& u, double x, double y) {
  return cylinder_coefficient(u.evaluate_times_z3(cylinder_point(x, y)));
}

std::string_view metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::Cusp: return "cusp";
    case MetricKind::FlatEnd: return "flat";
    case MetricKind::Ansatz: return "ansatz";
    case MetricKind::GraftedCollar: return "grafted";
  }
  return "?";
}

ConformalMetric ConformalMetric::cusp() {
  ConformalMetric m;
  m.kind_ = MetricKind::Cusp;
  m.s_min_ = -1e300;
  m.s_max_ = 0.0;
  return m;
}

ConformalMetric ConformalMetric::flat(double r_abs) {
  if (!(r_abs > 0.0)) throw Error(ErrorCode::ZeroResidue, "flat metric needs |R| > 0");
  ConformalMetric m;
  m.kind_ = MetricKind::FlatEnd;
  m.r_abs_ = r_abs;
  m.s_min_ = -1e300;
  m.s_max_ = 1e300;
  return m;
}

ConformalMetric ConformalMetric::ansatz(double r_abs, double c, double big_c) {
  if (!(0.0 < c && c < big_c && big_c < 1.0)) {
    throw Error(ErrorCode::BadRadii, "need 0 < c < C < 1");
  }
  if (!(r_abs > 0.0)) throw Error(ErrorCode::ZeroResidue, "Ansatz blend needs |R| > 0");
  ConformalMetric m;
  m.kind_ = MetricKind::Ansatz;
  m.r_abs_ = r_abs;
  m.c_ = c;
  m.big_c_ = big_c;
  m.s_min_ = -1e300;
  m.s_max_ = 0.0;
  return m;
}

ConformalMetric ConformalMetric::grafted(double t_abs, double k) {
  if (!(k > 0.0 && k < 1.0)) throw Error(ErrorCode::BadRadii, "collar radius must be in (0, 1)");
  if (!(t_abs > 0.0 && t_abs < (k / 3.0) * (k / 3.0))) {
    throw Error(ErrorCode::NeckTooWide, "need 0 < |t| < (K/3)^2");
  }
  ConformalMetric m;
  m.kind_ = MetricKind::GraftedCollar;
  m.t_abs_ = t_abs;
  m.k_ = k;
  m.s_min_ = std::log(t_abs) - std::log(k);
  m.s_max_ = std::log(k);
  return m;
}

bool ConformalMetric::contains_radius(double s) const {
  const double slack = 1e-12 * (1.0 + std::abs(s));
  if (kind_ == MetricKind::GraftedCollar) return s >= s_min_ - slack && s <= s_max_ + slack;
  if (kind_ == MetricKind::FlatEnd) return std::isfinite(s);
  return s < 0.0;
}

RadialJet ConformalMetric::jet(double s) const {
  if (!contains_radius(s)) {
    std::ostringstream os;
    os << "log|z| = " << s << " outside the " << metric_kind_name(kind_) << " metric domain";
    throw Error(ErrorCode::DomainError, os.str());
  }
  switch (kind_) {
    case MetricKind::Cusp: return cusp_jet(s);
    case MetricKind::FlatEnd: return flat_jet(r_abs_);
    case MetricKind::Ansatz: {
      const double lc = std::log(c_);
      const double lbig = std::log(big_c_);
      if (s <= lc) return flat_jet(r_abs_);
      if (s >= lbig) return cusp_jet(s);
      const double inv = 1.0 / (lbig - lc);
      return blend(flat_jet(r_abs_), cusp_jet(s), (s - lc) * inv, inv);
    }
    case MetricKind::GraftedCollar: {
      const double ll = std::log(t_abs_);
      const double a = kPi / ll;
      const double u = a * s;
      const double su = std::sin(u);
      const RadialJet csc{2.0 * std::log(kPi / std::abs(ll)) - 2.0 * std::log(su),
                          -2.0 * a * std::cos(u) / su, 2.0 * a * a / (su * su)};
      const double s1 = std::log(k_ / 3.0);
      const double s2 = std::log(2.0 * k_ / 3.0);
      const double inv = 1.0 / (s2 - s1);
      if (s >= s2) return cusp_jet(s);
      if (s >= s1) return blend(csc, cusp_jet(s), (s - s1) * inv, inv);
      const double sp = ll - s;
      const RadialJet mirror{-2.0 * std::log(-sp), -2.0 / (s - ll), 2.0 / ((s - ll) * (s - ll))};
      if (sp >= s2) return mirror;
      if (sp >= s1) return blend(csc, mirror, (sp - s1) * inv, -inv);
      return csc;
    }
  }
  return {};
}

double ConformalMetric::factor(cplx z) const {
  const double r = std::abs(z);
  if (r == 0.0) throw Error(ErrorCode::ZeroPoint, "conformal factor at z = 0");
  const double s = std::log(r);
  return std::exp(jet(s).g - 2.0 * s);
}

double ConformalMetric::curvature_at_s(double s) const {
  const RadialJet j = jet(s);
  return -0.5 * std::exp(-j.g) * j.g2;
}

double cusp_factor(cplx z) {
  const double r = std::abs(z);
  if (!(r > 0.0 && r < 1.0)) {
    throw Error(ErrorCode::DomainError, "cusp factor needs 0 < |z| < 1, got " + format_point(z));
  }
  const double l = std::log(r * r);
  return 4.0 / (r * r * l * l);
}

double flat_factor(double r_abs, cplx z) {
  if (!(r_abs > 0.0)) throw Error(ErrorCode::ZeroResidue, "flat factor needs |R| > 0");
  const double r = std::abs(z);
  if (r == 0.0) throw Error(ErrorCode::ZeroPoint, "flat factor at z = 0");
  return std::cbrt(2.0) * std::pow(r_abs, 2.0 / 3.0) / (r * r);
}

ConformalMetric ansatz_metric(const CubicLaurent& u, double c, double big_c, double delta) {
  if (!(0.0 < c && c < big_c && big_c < 1.0)) {
    throw Error(ErrorCode::BadRadii, "need 0 < c < C < 1");
  }
  const double r_abs = std::abs(u.residue());
  if (r_abs == 0.0) return ConformalMetric::cusp();
  ConformalMetric m = ConformalMetric::ansatz(r_abs, c, big_c);
  constexpr int kRadii = 33;
  constexpr int kAngles = 256;
  double min_norm2 = 1e300;
  for (int i = 0; i < kRadii; ++i) {
    const double r = c * std::pow(big_c / c, static_cast<double>(i) / (kRadii - 1));
    const double e3 = std::pow(m.factor(cplx(r, 0.0)), -3.0);
    for (int j = 0; j < kAngles; ++j) {
      const cplx z = std::polar(r, kTwoPi * j / kAngles);
      min_norm2 = std::min(min_norm2, std::norm(u.evaluate(z)) * e3);
    }
  }
  if (!(std::sqrt(min_norm2) > delta)) {
    std::ostringstream os;
    os << "min ||U|| on the interpolation ring is " << std::sqrt(min_norm2) << " <= " << delta;
    throw Error(ErrorCode::ZeroOnRing, os.str());
  }
  return m;
}

ConformalMetric grafted_metric(cplx t, double k) { return ConformalMetric::grafted(std::abs(t), k); }

double curvature(const ConformalMetric& metric, cplx z) {
  const double r = std::abs(z);
  if (r == 0.0) throw Error(ErrorCode::DomainError, "curvature at z = 0");
  return metric.curvature_at_s(std::log(r));
}

double curvature_fd(const ConformalMetric& metric, cplx z, double h_rel) {
  const double h = h_rel * std::abs(z);
  auto lf = [&](cplx p) { return std::log(metric.factor(p)); };
  const double c0 = lf(z);
  const double lap = (lf(z + h) + lf(z - h) + lf(z + cplx(0, h)) + lf(z - cplx(0, h)) - 4.0 * c0) / (h * h);
  return -0.5 * lap / std::exp(c0);
}

double norm_U_squared(cplx u, double e_phi) {
  if (!(e_phi > 0.0)) throw Error(ErrorCode::DomainError, "conformal factor must be positive");
  return std::norm(u) / (e_phi * e_phi * e_phi);
}

void PlumbingDatum::validate() const {
  const double ta = std::abs(t);
  if (!(k > 0.0 && k < 1.0)) throw Error(ErrorCode::BadRadii, "collar radius must be in (0, 1)");
  if (!(ta > 0.0 && ta < k * k)) throw Error(ErrorCode::NeckTooWide, "need 0 < |t| < K^2");
  const auto ia = a.find(-3);
  const auto ib = b.find(-3);
  const cplx am3 = ia == a.end() ? cplx(0.0) : ia->second;
  const cplx bm3 = ib == b.end() ? cplx(0.0) : ib->second;
  if (std::abs(am3 + bm3) > 1e-14 * (1.0 + std::abs(am3))) {
    throw Error(ErrorCode::DomainError, "residues must match: b_-3 = -a_-3");
  }
  for (const auto* side : {&a, &b}) {
    for (const auto& [m, v] : *side) {
      if (m < -3) throw Error(ErrorCode::DomainError, "pole order exceeds 3");
    }
  }
}

cplx PlumbingDatum::log_t() const { return std::log(t) + cplx(0.0, kTwoPi * log_branch); }

double PlumbingDatum::mu_half_width() const { return std::log(k) - 0.5 * std::log(std::abs(t)); }

PlumbingValue plumbing_differential(const PlumbingDatum& d, cplx ell) {
  const double w = d.mu_half_width();
  const double mu = ell.real();
  if (std::abs(mu) > w + 1e-12 * (1.0 + w)) {
    std::ostringstream os;
    os << "Re ell = " << mu << " outside [-" << w << ", " << w << "]";
    throw Error(ErrorCode::OutsideCollar, os.str());
  }
  const cplx half_log_t = 0.5 * d.log_t();
  PlumbingValue out;
  const auto a3 = d.a.find(-3);
  out.value = a3 == d.a.end() ? cplx(0.0) : a3->second;
  for (const auto& [m, coef] : d.a) {
    const int n = m + 3;
    if (n < 1) continue;
    const cplx term = coef * std::exp(static_cast<double>(n) * (half_log_t + ell));
    if (n <= d.truncation) out.value += term; else out.truncation_error += std::abs(term);
  }
  for (const auto& [m, coef] : d.b) {
    const int n = m + 3;
    if (n < 1) continue;
    const cplx term = coef * std::exp(static_cast<double>(n) * (half_log_t - ell));
    if (n <= d.truncation) out.value -= term; else out.truncation_error += std::abs(term);
  }
  return out;
}

void write_laurent(std::ostream& os, const CubicLaurent& u) {
  os.precision(17);
  os << "truncation " << u.truncation() << "\n";
  for (const auto& [m, a] : u.coeffs()) os << m << " " << a.real() << " " << a.imag() << "\n";
}

namespace {

bool next_content_line(std::istream& is, std::string& line, int& lineno) {
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] void parse_fail(int lineno, const std::string& line) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": '" + line + "'");
}

void read_coefficient(std::istringstream& ls, std::map<int, cplx>& into, int lineno,
                      const std::string& line) {
  int m = 0;
  double re = 0.0;
  double im = 0.0;
  if (!(ls >> m >> re >> im)) parse_fail(lineno, line);
  std::string extra;
  if (ls >> extra) parse_fail(lineno, line);
  into[m] = cplx(re, im);
}

}  // namespace

CubicLaurent read_laurent(std::istream& is) {
  std::map<int, cplx> coeffs;
  int truncation = kDefaultTruncation;
  std::string line;
  int lineno = 0;
  while (next_content_line(is, line, lineno)) {
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "truncation") {
      if (!(ls >> truncation)) parse_fail(lineno, line);
      continue;
    }
    std::istringstream whole(line);
    read_coefficient(whole, coeffs, lineno, line);
  }
  return CubicLaurent(std::move(coeffs), truncation);
}

void write_plumbing(std::ostream& os, const PlumbingDatum& d) {
  os.precision(17);
  os << "t " << d.t.real() << " " << d.t.imag() << "\n";
  os << "K " << d.k << "\n";
  os << "truncation " << d.truncation << "\n";
  os << "branch " << d.log_branch << "\n";
  for (const auto& [m, v] : d.a) os << "a " << m << " " << v.real() << " " << v.imag() << "\n";
  for (const auto& [m, v] : d.b) os << "b " << m << " " << v.real() << " " << v.imag() << "\n";
}

PlumbingDatum read_plumbing(std::istream& is) {
  PlumbingDatum d;
  std::string line;
  int lineno = 0;
  bool have_t = false;
  while (next_content_line(is, line, lineno)) {
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "t") {
      double re = 0.0;
      double im = 0.0;
      if (!(ls >> re >> im)) parse_fail(lineno, line);
      d.t = cplx(re, im);
      have_t = true;
    } else if (head == "K") {
      if (!(ls >> d.k)) parse_fail(lineno, line);
    } else if (head == "truncation") {
      if (!(ls >> d.truncation)) parse_fail(lineno, line);
    } else if (head == "branch") {
      if (!(ls >> d.log_branch)) parse_fail(lineno, line);
    } else if (head == "a") {
      read_coefficient(ls, d.a, lineno, line);
    } else if (head == "b") {
      read_coefficient(ls, d.b, lineno, line);
    } else {
      parse_fail(lineno, line);
    }
  }
  if (!have_t) throw Error(ErrorCode::ParseError, "plumbing datum without a 't' line");
  d.validate();
  return d;
}

}  // namespace rp2ends
