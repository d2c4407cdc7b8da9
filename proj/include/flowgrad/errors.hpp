#pragma once

#include <stdexcept>
#include <string>

namespace flowgrad {

/// Bad argument value (sigma <= 0, threshold out of range, ...).
struct InvalidParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Structurally bad input data (dimension mismatch, non-finite values, ...).
struct InvalidInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem-level failure; message names the offending path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed binary payload (bad magic, truncated file, wrong variant).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Text parse failure with a 1-based line number.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};

/// Frame-indexed file sets that cannot be matched up.
struct PairingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scenario that cannot be rendered (actor leaves the canvas, ...).
struct InvalidScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace flowgrad
