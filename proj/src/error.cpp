#include "bidsbox/error.hpp"

namespace bidsbox {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::EmptyLabel: return "EmptyLabel";
    case ErrorCode::IllegalCharacter: return "IllegalCharacter";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::EmptyScans: return "EmptyScans";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::IllegalOverride: return "IllegalOverride";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::BadFlipAngle: return "BadFlipAngle";
    case ErrorCode::ConverterNotFound: return "ConverterNotFound";
    case ErrorCode::ConverterFailed: return "ConverterFailed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NoSeriesProduced: return "NoSeriesProduced";
    case ErrorCode::OutputNotEmpty: return "OutputNotEmpty";
    case ErrorCode::ClassificationFailed: return "ClassificationFailed";
    case ErrorCode::StateFileMissing: return "StateFileMissing";
    case ErrorCode::StateVersionUnsupported: return "StateVersionUnsupported";
    case ErrorCode::MalformedState: return "MalformedState";
    case ErrorCode::SessionConflict: return "SessionConflict";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotADirectory: return "NotADirectory";
    case ErrorCode::BadRuleTable: return "BadRuleTable";
    }
    return "Unknown";
}

} // namespace bidsbox
