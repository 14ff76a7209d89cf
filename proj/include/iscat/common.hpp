#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace iscat {

using Complex = std::complex<double>;

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy mirrors the process exit codes: config 2, numeric 3, I/O 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BadMagicError : IoError {
    using IoError::IoError;
};

struct TruncationError : IoError {
    using IoError::IoError;
};

struct VersionError : IoError {
    using IoError::IoError;
};

}  // namespace iscat
