#pragma once

#include <stdexcept>
#include <string>

namespace rmrcm {

/// Invalid user-supplied parameter or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver failed to reach the requested tolerance, or a dense
/// factorization hit a vanishing pivot.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, int iterations = 0)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Message transport violation (bad checksum, unexpected sender).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rmrcm
