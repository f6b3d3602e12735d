#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rp2ends {

enum class ErrorCode {
  ZeroVector,
  NotUnimodular,
  NonPositiveSpectrum,
  NumericallyAmbiguous,
  UnsupportedHolonomy,
  NotHyperbolic,
  ZeroResidue,
  InvalidSpectrum,
  DomainError,
  ZeroPoint,
  ZeroOnRing,
  BadRadii,
  OutsideCollar,
  NeckTooWide,
  UnpopulatedField,
  BarrierFailure,
  NewtonDivergence,
  BracketsViolated,
  StepTooLarge,
  FieldDomainError,
  NoConvergenceByYmax,
  InconsistentWitness,
  NonIntegrablePerturbation,
  IterationStall,
  DecayHypothesisViolated,
  PreconditionViolated,
  ParseError,
  ConfigError,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rp2ends
