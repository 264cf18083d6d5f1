#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dan {

enum class ErrorCode {
    MissingClass,
    NotPositiveDefinite,
    NonFiniteInput,
    InvalidLabel,
    DimensionMismatch,
    SplitTooSmall,
    NoTargetSamples,
    InvalidFrr,
    ThresholdUnset,
    EmptyInput,
    InvalidConfig,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    SizeMismatch,
    CorruptFile,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingClass: return "MissingClass";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::InvalidLabel: return "InvalidLabel";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::SplitTooSmall: return "SplitTooSmall";
        case ErrorCode::NoTargetSamples: return "NoTargetSamples";
        case ErrorCode::InvalidFrr: return "InvalidFrr";
        case ErrorCode::ThresholdUnset: return "ThresholdUnset";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code name so CLI diagnostics stay greppable.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace dan
