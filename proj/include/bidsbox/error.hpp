#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bidsbox {

enum class ErrorCode {
    // request / label validation
    EmptyLabel,
    IllegalCharacter,
    MalformedJson,
    MissingKey,
    UnknownKey,
    TypeMismatch,
    EmptyScans,
    BadLabel,
    IllegalOverride,
    // sidecar
    NegativeTime,
    BadFlipAngle,
    // converter
    ConverterNotFound,
    ConverterFailed,
    Timeout,
    NoSeriesProduced,
    // layout / state
    OutputNotEmpty,
    ClassificationFailed,
    StateFileMissing,
    StateVersionUnsupported,
    MalformedState,
    SessionConflict,
    Busy,
    IoError,
    NotADirectory,
    BadRuleTable,
};

std::string_view to_string(ErrorCode code) noexcept;

struct FailedSeries {
    std::string series_name;
    std::string reason;

    bool operator==(const FailedSeries &) const = default;
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), code_(code) {}

    Error(ErrorCode code, const std::string &message, std::vector<FailedSeries> failed)
        : std::runtime_error(message), code_(code), failed_(std::move(failed)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::vector<FailedSeries> &failed_series() const noexcept { return failed_; }

private:
    ErrorCode code_;
    std::vector<FailedSeries> failed_;
};

} // namespace bidsbox
