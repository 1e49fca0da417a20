#pragma once

#include <stdexcept>
#include <string>

namespace garchtail {

/// Failure classes. Each maps onto a process exit code in the CLI.
enum class ErrorKind {
    Config,
    InvalidDof,
    NonPositiveVariance,
    Dimension,
    Convergence,
    Explosion,
    MomentDiverged,
    TooFewParticles,
    DegenerateWeights,
    NoConvergence,
    NoCrossing,
    RejectionStall,
    NoExceedances,
    DegenerateDelta,
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::InvalidDof: return "InvalidDof";
        case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorKind::Dimension: return "DimensionError";
        case ErrorKind::Convergence: return "ConvergenceError";
        case ErrorKind::Explosion: return "ExplosionError";
        case ErrorKind::MomentDiverged: return "MomentDiverged";
        case ErrorKind::TooFewParticles: return "TooFewParticles";
        case ErrorKind::DegenerateWeights: return "DegenerateWeights";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NoCrossing: return "NoCrossing";
        case ErrorKind::RejectionStall: return "RejectionStall";
        case ErrorKind::NoExceedances: return "NoExceedances";
        case ErrorKind::DegenerateDelta: return "DegenerateDelta";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Exit codes: 2 configuration, 3 numerical, 4 non-convergence.
inline int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::InvalidDof:
        case ErrorKind::NonPositiveVariance:
        case ErrorKind::Dimension:
            return 2;
        case ErrorKind::NoConvergence:
        case ErrorKind::Convergence:
            return 4;
        default:
            return 3;
    }
}

}  // namespace garchtail
