#ifndef LEMOLE_ERRORS_HPP
#define LEMOLE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lemole {

enum class ErrorCode {
    MissingColumn,
    NonUniformSampling,
    NonNumericCell,
    EmptyFile,
    SplitTooSmall,
    ZeroVariance,
    FrameTooShort,
    WindowExceedsLookback,
    NonDescendingWindows,
    ShapeMismatch,
    LengthMismatch,
    EmptyText,
    EmptyTimestamps,
    ProviderUnavailable,
    EmbeddingShapeInvalid,
    CacheMiss,
    MalformedResponse,
    HashMismatch,
    SeriesTooShort,
    SingularRegression,
    DivergenceDetected,
    MissingArtifact,
    ConfigError,
    InvalidArgument,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. Carries a machine-checkable code plus a message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::NonUniformSampling: return "NonUniformSampling";
        case ErrorCode::NonNumericCell: return "NonNumericCell";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::SplitTooSmall: return "SplitTooSmall";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::FrameTooShort: return "FrameTooShort";
        case ErrorCode::WindowExceedsLookback: return "WindowExceedsLookback";
        case ErrorCode::NonDescendingWindows: return "NonDescendingWindows";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::EmptyTimestamps: return "EmptyTimestamps";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::EmbeddingShapeInvalid: return "EmbeddingShapeInvalid";
        case ErrorCode::CacheMiss: return "CacheMiss";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::HashMismatch: return "HashMismatch";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::SingularRegression: return "SingularRegression";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::MissingArtifact: return "MissingArtifact";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

} // namespace lemole

#endif // LEMOLE_ERRORS_HPP
