#ifndef BIMCC_ERROR_HPP
#define BIMCC_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace bimcc {

/// Error categories used across the library. Names are stable and appear in
/// CLI diagnostics, so scripts can match on them.
enum class ErrorCode {
    EmptyCloud,
    InvalidQuery,
    InsufficientPairs,
    DegenerateConfiguration,
    InvalidSigma,
    InvalidRotation,
    ImageTooSmall,
    DimensionMismatch,
    NoValidDisparities,
    InvalidDirection,
    DisparityOutOfRange,
    DegenerateScene,
    PlyParseError,
    PlyCountMismatch,
    UnsupportedPgm,
    PgmTruncated,
    InvalidArgument,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyCloud: return "EmptyCloud";
        case ErrorCode::InvalidQuery: return "InvalidQuery";
        case ErrorCode::InsufficientPairs: return "InsufficientPairs";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
        case ErrorCode::InvalidRotation: return "InvalidRotation";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NoValidDisparities: return "NoValidDisparities";
        case ErrorCode::InvalidDirection: return "InvalidDirection";
        case ErrorCode::DisparityOutOfRange: return "DisparityOutOfRange";
        case ErrorCode::DegenerateScene: return "DegenerateScene";
        case ErrorCode::PlyParseError: return "PlyParseError";
        case ErrorCode::PlyCountMismatch: return "PlyCountMismatch";
        case ErrorCode::UnsupportedPgm: return "UnsupportedPgm";
        case ErrorCode::PgmTruncated: return "PgmTruncated";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

/// Exception type thrown by all fallible operations.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bimcc

#endif  // BIMCC_ERROR_HPP
