#pragma once

#include <stdexcept>
#include <string>

namespace rml {

// Bad user input: unknown flags, malformed config keys, invalid loss spec.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data files, unknown ids, shape mismatches.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Zero-norm embedding fed to a cosine kernel.
struct DegenerateVectorError : std::runtime_error {
    explicit DegenerateVectorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rml
