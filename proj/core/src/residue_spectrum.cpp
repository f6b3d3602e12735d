#include "rp2ends/residue_spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "rp2ends/error.hpp"

namespace rp2ends {

namespace {

double p_coeff(cplx r) { return -3.0 * std::pow(2.0, -2.0 / 3.0) * std::pow(std::abs(r), 2.0 / 3.0); }

Triple descending(Triple t) {
  std::sort(t.begin(), t.end(), std::greater<>());
  return t;
}

double principal_arg(double a) {
  a = std::remainder(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

}  // namespace

double chi(cplx r, double lambda) {
  return lambda * lambda * lambda + p_coeff(r) * lambda - r.imag();
}

double discriminant(cplx r) {
  // q^2/4 + p^3/27 with q = -Im R simplifies to -(Re R)^2/4.
  return -0.25 * r.real() * r.real();
}

Triple chi_roots(cplx r) {
  const double p = p_coeff(r);
  const double q = -r.imag();
  if (p == 0.0) return {0.0, 0.0, 0.0};
  const double d = discriminant(r);
  if (std::abs(d) <= 1e-14 * (1.0 + std::norm(r))) {
    const double simple = 3.0 * q / p;
    const double dbl = -1.5 * q / p;
    return descending({simple, dbl, dbl});
  }
  const double m = 2.0 * std::sqrt(-p / 3.0);
  // cos(3 theta) = (3q / (2p)) sqrt(-3/p)
  const double arg = std::clamp(1.5 * q / p * std::sqrt(-3.0 / p), -1.0, 1.0);
  const double theta = std::acos(arg) / 3.0;
  Triple out;
  for (int k = 0; k < 3; ++k) out[k] = m * std::cos(theta - kTwoPi * k / 3.0);
  return descending(out);
}

HolonomyClass classify_residue(cplx r) {
  HolonomyClass out;
  if (r == cplx(0.0, 0.0)) {
    out.kind = HolonomyKind::Parabolic;
    out.eigenvalues = {1.0, 1.0, 1.0};
    return out;
  }
  const Triple l = chi_roots(r);
  out.kind = r.real() == 0.0 ? HolonomyKind::QuasiHyperbolic : HolonomyKind::Hyperbolic;
  for (int i = 0; i < 3; ++i) out.eigenvalues[i] = std::exp(kTwoPi * l[i]);
  return out;
}

bool class_symmetry_check(cplx r) {
  const HolonomyClass a = classify_residue(r);
  const HolonomyClass b = classify_residue(-std::conj(r));
  if (a.kind != b.kind) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.eigenvalues[i] - b.eigenvalues[i]) > 1e-12 * std::max(1.0, a.eigenvalues[i])) {
      return false;
    }
  }
  return true;
}

cplx xi_branch(cplx r) {
  if (r == cplx(0.0, 0.0)) throw Error(ErrorCode::ZeroResidue, "xi is undefined for R = 0");
  const double mod = std::cbrt(2.0 / std::abs(r));
  const double a = principal_arg(kPi / 2.0 - std::arg(r)) / 3.0;
  // principal_arg lands in (-pi, pi], so a is in (-pi/3, pi/3].
  return std::polar(mod, a);
}

cplx model_coordinate_scale(cplx r) {
  const cplx xi = xi_branch(r);
  return xi / std::norm(xi);
}

DirectionEigenvalues direction_eigenvalues(cplx r, double iota) {
  const cplx c = model_coordinate_scale(r);
  DirectionEigenvalues out;
  const double shifts[3] = {0.0, -kTwoPi / 3.0, kTwoPi / 3.0};
  for (int k = 0; k < 3; ++k) {
    out.mu[k] = 2.0 * (c * std::polar(1.0, iota + shifts[k])).real();
    out.rho[k] = 2.0 * (c * std::polar(1.0, shifts[k])).real();
  }
  return out;
}

std::string_view twist_sign_name(TwistSign s) {
  switch (s) {
    case TwistSign::PlusInfinity: return "plus_infinity";
    case TwistSign::MinusInfinity: return "minus_infinity";
    case TwistSign::Undefined: return "undefined";
  }
  return "?";
}

TwistSign twist_sign(cplx r) {
  if (r.real() > 0.0) return TwistSign::PlusInfinity;
  if (r.real() < 0.0) return TwistSign::MinusInfinity;
  return TwistSign::Undefined;
}

std::vector<cplx> residues_for_spectrum(const Triple& l) {
  const double sum = l[0] + l[1] + l[2];
  if (!(std::abs(sum) <= 1e-12)) {
    throw Error(ErrorCode::InvalidSpectrum, "eigenvalues must sum to zero");
  }
  const double e2 = l[0] * l[1] + l[0] * l[2] + l[1] * l[2];
  const double im = l[0] * l[1] * l[2];
  const double s = -e2 / (3.0 * std::pow(2.0, -2.0 / 3.0));
  if (s < -1e-12) throw Error(ErrorCode::InvalidSpectrum, "second symmetric function is positive");
  const double mod = std::pow(std::max(s, 0.0), 1.5);
  const double re2 = mod * mod - im * im;
  if (re2 < -1e-12 * std::max(1.0, mod * mod)) {
    throw Error(ErrorCode::InvalidSpectrum, "|R|^2 < (Im R)^2");
  }
  const double re = std::sqrt(std::max(re2, 0.0));
  // Snap Re R to zero when the triple has a repeated root.
  const Triple d = descending(l);
  const double spread = std::max(1.0, std::abs(d[0] - d[2]));
  const bool repeated = std::abs(d[0] - d[1]) <= 1e-9 * spread || std::abs(d[1] - d[2]) <= 1e-9 * spread;
  if (repeated || re == 0.0) return {cplx(0.0, im)};
  return {cplx(re, im), cplx(-re, im)};
}

SpectrumReport spectrum_report(cplx r) {
  SpectrumReport out;
  out.residue = r;
  out.lambda = chi_roots(r);
  for (int i = 0; i < 3; ++i) out.alpha[i] = std::exp(kTwoPi * out.lambda[i]);
  out.cls = classify_residue(r);
  out.discriminant = discriminant(r);
  out.twist = twist_sign(r);
  if (r != cplx(0.0, 0.0)) {
    const cplx xi = xi_branch(r);
    out.xi = xi;
    const double a = std::arg(xi);
    out.iota = kPi / 3.0 - a;
    out.iota_hat = kPi - a;
    const DirectionEigenvalues de = direction_eigenvalues(r, *out.iota);
    out.mu = de.mu;
    out.rho = de.rho;
    if (std::abs(a - kPi / 3.0) < 1e-15) out.twist = TwistSign::Undefined;
  }
  return out;
}

}  // namespace rp2ends
