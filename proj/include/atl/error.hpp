#pragma once

#include <stdexcept>
#include <string>

namespace atl {

// Error taxonomy mirrors the CLI exit codes: usage = 1, data = 2, numeric = 3.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical or assumption failures: contraction violated, unsupported
// activation/loss combination, divergence, oracle size limits.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model container failures, kept distinct so callers can tell them apart.
struct VersionError : DataError {
    explicit VersionError(const std::string& msg) : DataError(msg) {}
};

struct TruncationError : DataError {
    explicit TruncationError(const std::string& msg) : DataError(msg) {}
};

struct ChecksumError : DataError {
    explicit ChecksumError(const std::string& msg) : DataError(msg) {}
};

} // namespace atl
