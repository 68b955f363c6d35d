#pragma once

#include <stdexcept>
#include <string>

namespace mclnn {

// Error categories map one-to-one onto the CLI exit codes (see cli.hpp).

// Bad configuration: schema violations, unknown keys, invariant breaks.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or unreadable files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: wav payloads, manifests, caches, model containers,
// out-of-range folds or labels.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses or gradients during training.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mclnn
