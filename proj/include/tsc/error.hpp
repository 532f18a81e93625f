#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsc {

enum class ErrorCode {
    // data
    DimensionMismatch,
    InvalidT0,
    NoControls,
    NonBinaryValue,
    OutOfBounds,
    ParseError,
    RaggedPanel,
    CovariateNotConstant,
    LengthMismatch,
    TooFewControls,
    Empty,
    DegenerateRange,
    // numerical
    NonFiniteInput,
    SingularDesign,
    InvalidBracket,
    // configuration
    InvalidConfig,
    ConfigError,
    // io
    IoError,
};

/// Coarse error families; the CLI maps them onto process exit codes.
enum class ErrorFamily { Config = 2, Data = 3, Numerical = 4, Io = 5 };

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidT0: return "InvalidT0";
        case ErrorCode::NoControls: return "NoControls";
        case ErrorCode::NonBinaryValue: return "NonBinaryValue";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::RaggedPanel: return "RaggedPanel";
        case ErrorCode::CovariateNotConstant: return "CovariateNotConstant";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::TooFewControls: return "TooFewControls";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::DegenerateRange: return "DegenerateRange";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::SingularDesign: return "SingularDesign";
        case ErrorCode::InvalidBracket: return "InvalidBracket";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

constexpr ErrorFamily family_of(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFiniteInput:
        case ErrorCode::SingularDesign:
        case ErrorCode::InvalidBracket:
            return ErrorFamily::Numerical;
        case ErrorCode::InvalidConfig:
        case ErrorCode::ConfigError:
            return ErrorFamily::Config;
        case ErrorCode::IoError:
            return ErrorFamily::Io;
        default:
            return ErrorFamily::Data;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorFamily family() const noexcept { return family_of(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace tsc
