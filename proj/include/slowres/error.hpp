#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slowres {

enum class ErrorKind {
    NonFinite,
    SingularSpectrum,
    NoConvergence,
    EmptySeries,
    DegenerateRange,
    IllConditioned,
    ConfigError,
    TooShort,
    ZeroTangent,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` distinguishes failure modes
/// so the CLI can map them onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Numerical failures (as opposed to bad input or I/O).
    bool numerical() const noexcept
    {
        switch (kind_) {
        case ErrorKind::ConfigError:
        case ErrorKind::Io:
            return false;
        default:
            return true;
        }
    }

private:
    ErrorKind kind_;
};

/// Raised by spectral_radius when the iteration cap is hit; carries the best
/// estimate seen so far.
class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string& what, double best_estimate)
        : Error(ErrorKind::NoConvergence, what), best_(best_estimate) {}

    double best_estimate() const noexcept { return best_; }

private:
    double best_;
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularSpectrum: return "SingularSpectrum";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EmptySeries: return "EmptySeries";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::ZeroTangent: return "ZeroTangent";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

} // namespace slowres
