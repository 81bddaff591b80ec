// error.hpp: exception type carrying a machine-readable error code

#pragma once

#include <stdexcept>
#include <string>

namespace icct {

/// Error codes surfaced to callers and to the CLI's JSON error channel.
enum class ErrorCode {
    InvalidInput,
    NonConvergence,
    Instability,
    DimensionCap,
    PropagationTolerance,
    NoAdmissibleRoot,
    AmbiguousRoot,
    DegenerateSidebands,
    NoUsableRecords,
    BracketEdge,
    Uninformative,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::Instability: return "Instability";
        case ErrorCode::DimensionCap: return "DimensionCap";
        case ErrorCode::PropagationTolerance: return "PropagationTolerance";
        case ErrorCode::NoAdmissibleRoot: return "NoAdmissibleRoot";
        case ErrorCode::AmbiguousRoot: return "AmbiguousRoot";
        case ErrorCode::DegenerateSidebands: return "DegenerateSidebands";
        case ErrorCode::NoUsableRecords: return "NoUsableRecords";
        case ErrorCode::BracketEdge: return "BracketEdge";
        case ErrorCode::Uninformative: return "Uninformative";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace icct
