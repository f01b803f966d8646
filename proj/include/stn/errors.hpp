#ifndef STN_ERRORS_HPP
#define STN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stn {

// Invalid layer/model/dataset configuration (bad shapes, out-of-range parameters).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime input that does not match what the callee was configured for.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Operation invoked in a state that cannot serve it (e.g. incomplete window).
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk artifact (bad magic, version, truncation, shape mismatch).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace stn

#endif
