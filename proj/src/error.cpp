#include "mocaplab/error.hpp"

namespace mocap {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotRigid: return "NotRigid";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::OutsideLensDomain: return "OutsideLensDomain";
    case ErrorCode::DegenerateBillboard: return "DegenerateBillboard";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::UnnormalizedWeights: return "UnnormalizedWeights";
    case ErrorCode::BadScript: return "BadScript";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::BadInput: return "BadInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mocap
