#include "decoupler/error.hpp"

namespace decoupler {

const char* errorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::UnknownSymbol: return "UnknownSymbol";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::NotInverse: return "NotInverse";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::MismatchedSignature: return "MismatchedSignature";
    case ErrorKind::HintInconsistent: return "HintInconsistent";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::SingularCandidate: return "SingularCandidate";
    case ErrorKind::ShootingFailed: return "ShootingFailed";
    case ErrorKind::CflViolation: return "CFLViolation";
    case ErrorKind::BlowupDetected: return "BlowupDetected";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::RetryExhausted: return "RetryExhausted";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::InvalidPartition: return "InvalidPartition";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
  }
  return "Error";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace decoupler
