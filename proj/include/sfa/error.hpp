#pragma once
#include <stdexcept>
#include <string>

namespace sfa {

enum class ErrorCode {
    RankDeficient,
    DimensionMismatch,
    ZeroVariance,
    UnknownColumn,
    NonPositiveValue,
    MissingCoefficient,
    InvalidParams,
    NoConvergence,
    DegenerateFolds,
    SupportTooLarge,
    MissingSE,
    TooFewBins,
    MissingColumn,
    ParseError,
    EmptyData,
    InvalidConfig,
};

// Broad failure class, used by the command line tool to pick an exit code.
enum class ErrorKind { Config, Data, Numerical };

inline const char* to_string(ErrorCode c)
{
    switch (c) {
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::UnknownColumn: return "UnknownColumn";
        case ErrorCode::NonPositiveValue: return "NonPositiveValue";
        case ErrorCode::MissingCoefficient: return "MissingCoefficient";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::DegenerateFolds: return "DegenerateFolds";
        case ErrorCode::SupportTooLarge: return "SupportTooLarge";
        case ErrorCode::MissingSE: return "MissingSE";
        case ErrorCode::TooFewBins: return "TooFewBins";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyData: return "EmptyData";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

inline ErrorKind kind_of(ErrorCode c)
{
    switch (c) {
        case ErrorCode::InvalidConfig:
            return ErrorKind::Config;
        case ErrorCode::UnknownColumn:
        case ErrorCode::NonPositiveValue:
        case ErrorCode::MissingColumn:
        case ErrorCode::ParseError:
        case ErrorCode::EmptyData:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::ZeroVariance:
            return ErrorKind::Data;
        default:
            return ErrorKind::Numerical;
    }
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }
    ErrorKind kind() const noexcept { return kind_of(code_); }

private:
    ErrorCode code_;
};

} // namespace sfa
