#pragma once

#include <iosfwd>
#include <map>
#include <string_view>

#include "rp2ends/types.hpp"

namespace rp2ends {

inline constexpr int kDefaultTruncation = 16;

// U = sum_m a_m z^m dz^3 around a puncture at z = 0.
class CubicLaurent {
 public:
  CubicLaurent() = default;
  explicit CubicLaurent(std::map<int, cplx> coeffs, int truncation = kDefaultTruncation);

  static CubicLaurent pure(cplx residue);

  cplx residue() const { return coefficient(-3); }
  cplx coefficient(int m) const;
  const std::map<int, cplx>& coeffs() const { return coeffs_; }
  int truncation() const { return truncation_; }

  // Coefficient of dz^3 at z, terms with m <= truncation.
  cplx evaluate(cplx z) const;
  // z^3 times the coefficient; regular at z = 0.
  cplx evaluate_times_z3(cplx z) const;

 private:
  std::map<int, cplx> coeffs_;
  int truncation_ = kDefaultTruncation;
};

// Cylinder chart of an end. The point w = x + iy sits at z = exp(-ix - y),
// so the core loop x: 0 -> 2pi runs clockwise and the puncture is y -> inf.
// With this orientation the cubic differential is V(w) dw^3 where
// V = i * conj(z^3 U_z). A pure pole R z^-3 dz^3 gives V = i conj(R).
cplx cylinder_point(double x, double y);
cplx cylinder_coefficient(cplx z3u);
cplx cylinder_differential(const CubicLaurent& u, double x, double y);

enum class MetricKind { Cusp, FlatEnd, Ansatz, GraftedCollar };

std::string_view metric_kind_name(MetricKind k);

// G(s) = log of the cylinder conformal factor as a function of s = log|z|,
// with first and second derivatives in s.
struct RadialJet {
  double g = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
};

class ConformalMetric {
 public:
  static ConformalMetric cusp();
  static ConformalMetric flat(double r_abs);
  static ConformalMetric ansatz(double r_abs, double c, double big_c);
  static ConformalMetric grafted(double t_abs, double k);

  MetricKind kind() const { return kind_; }
  double r_abs() const { return r_abs_; }
  double inner_radius() const { return c_; }
  double outer_radius() const { return big_c_; }
  double neck_abs() const { return t_abs_; }
  double collar() const { return k_; }

  bool contains_radius(double s) const;
  double s_min() const { return s_min_; }
  double s_max() const { return s_max_; }

  RadialJet jet(double s) const;

  // e^phi in the z coordinate.
  double factor(cplx z) const;
  // log conformal factor in the cylinder chart and its y-derivatives.
  double cylinder_phi(double y) const { return jet(-y).g; }
  double cylinder_phi_y(double y) const { return -jet(-y).g1; }
  double cylinder_phi_yy(double y) const { return jet(-y).g2; }
  double curvature_at_s(double s) const;

 private:
  ConformalMetric() = default;

  MetricKind kind_ = MetricKind::Cusp;
  double r_abs_ = 0.0;
  double c_ = 0.0;
  double big_c_ = 0.0;
  double t_abs_ = 0.0;
  double k_ = 0.0;
  double s_min_ = -1e300;
  double s_max_ = 0.0;
};

double cusp_factor(cplx z);
double flat_factor(double r_abs, cplx z);

inline constexpr double kDefaultInnerRadius = 0.1;
inline constexpr double kDefaultOuterRadius = 0.5;
inline constexpr double kDefaultCollar = 0.5;

ConformalMetric ansatz_metric(const CubicLaurent& u, double c = kDefaultInnerRadius,
                              double big_c = kDefaultOuterRadius, double delta = 1e-6);
ConformalMetric grafted_metric(cplx t, double k = kDefaultCollar);

// Analytic curvature -1/2 Laplacian(phi) in the metric.
double curvature(const ConformalMetric& metric, cplx z);
// Same quantity from centred differences of log factor(z) with step h_rel*|z|.
double curvature_fd(const ConformalMetric& metric, cplx z, double h_rel = 1e-4);

double norm_U_squared(cplx u, double e_phi);

// Quintic smoothstep and its derivatives on [0, 1].
struct Smoothstep {
  double h = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
};
Smoothstep smoothstep(double t);

struct PlumbingDatum {
  cplx t;
  std::map<int, cplx> a;
  std::map<int, cplx> b;
  double k = kDefaultCollar;
  int truncation = kDefaultTruncation;
  int log_branch = 0;  // log t = Log t + 2 pi i * log_branch

  void validate() const;
  cplx log_t() const;
  double mu_half_width() const;  // log K - 1/2 log|t|
};

struct PlumbingValue {
  cplx value;
  double truncation_error = 0.0;
};

// Coefficient of d ell^3 on the collar, ell = log z - 1/2 log t.
PlumbingValue plumbing_differential(const PlumbingDatum& d, cplx ell);

// Text format: one coefficient per line "m re im"; optional "truncation M".
void write_laurent(std::ostream& os, const CubicLaurent& u);
CubicLaurent read_laurent(std::istream& is);
// Lines "t re im", "K value", "truncation M", "branch n", "a m re im", "b m re im".
void write_plumbing(std::ostream& os, const PlumbingDatum& d);
PlumbingDatum read_plumbing(std::istream& is);

}  // namespace rp2ends
