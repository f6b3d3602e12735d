#include "rp2ends/error.hpp"

namespace rp2ends {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::NonPositiveSpectrum: return "NonPositiveSpectrum";
    case ErrorCode::NumericallyAmbiguous: return "NumericallyAmbiguous";
    case ErrorCode::UnsupportedHolonomy: return "UnsupportedHolonomy";
    case ErrorCode::NotHyperbolic: return "NotHyperbolic";
    case ErrorCode::ZeroResidue: return "ZeroResidue";
    case ErrorCode::InvalidSpectrum: return "InvalidSpectrum";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ZeroPoint: return "ZeroPoint";
    case ErrorCode::ZeroOnRing: return "ZeroOnRing";
    case ErrorCode::BadRadii: return "BadRadii";
    case ErrorCode::OutsideCollar: return "OutsideCollar";
    case ErrorCode::NeckTooWide: return "NeckTooWide";
    case ErrorCode::UnpopulatedField: return "UnpopulatedField";
    case ErrorCode::BarrierFailure: return "BarrierFailure";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::BracketsViolated: return "BracketsViolated";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::FieldDomainError: return "FieldDomainError";
    case ErrorCode::NoConvergenceByYmax: return "NoConvergenceByYmax";
    case ErrorCode::InconsistentWitness: return "InconsistentWitness";
    case ErrorCode::NonIntegrablePerturbation: return "NonIntegrablePerturbation";
    case ErrorCode::IterationStall: return "IterationStall";
    case ErrorCode::DecayHypothesisViolated: return "DecayHypothesisViolated";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

}  // namespace rp2ends
