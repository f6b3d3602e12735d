#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "rp2ends/projlin.hpp"
#include "rp2ends/types.hpp"

namespace rp2ends {

// chi(lambda) = lambda^3 - 3 * 2^(-2/3) |R|^(2/3) lambda - Im R
double chi(cplx residue, double lambda);

// Real roots of chi, descending, with multiplicity.
Triple chi_roots(cplx residue);

// -|R|^2/4 + (Im R)^2/4; never positive.
double discriminant(cplx residue);

HolonomyClass classify_residue(cplx residue);

bool class_symmetry_check(cplx residue);

// Cube root of 2i/R with argument in (-pi/3, pi/3].
cplx xi_branch(cplx residue);

// The rescaled branch xi/|xi|^2 that turns the cylinder coordinate into the
// triangle-model coordinate; equals xi when |R| = 2.
cplx model_coordinate_scale(cplx residue);

struct DirectionEigenvalues {
  Triple mu;
  Triple rho;
};

DirectionEigenvalues direction_eigenvalues(cplx residue, double iota);

enum class TwistSign { PlusInfinity, MinusInfinity, Undefined };

std::string_view twist_sign_name(TwistSign s);

TwistSign twist_sign(cplx residue);

// All residues whose chi has the given roots: one when Re R = 0, else two.
std::vector<cplx> residues_for_spectrum(const Triple& lambda);

struct SpectrumReport {
  cplx residue;
  Triple lambda{};
  Triple alpha{};
  HolonomyClass cls;
  double discriminant = 0.0;
  std::optional<cplx> xi;
  std::optional<double> iota;
  std::optional<double> iota_hat;
  std::optional<Triple> mu;
  std::optional<Triple> rho;
  TwistSign twist = TwistSign::Undefined;
};

SpectrumReport spectrum_report(cplx residue);

}  // namespace rp2ends
