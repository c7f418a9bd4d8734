#ifndef HASTE_ERROR_HPP
#define HASTE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace haste {

/// Inconsistent shapes, dimensions or parameters handed to an operator.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Container envelope is not something we can parse (magic, version, JSON).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Container parsed but its payload is damaged (CRC, truncation, bad offsets).
class CorruptionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Model or dataset content does not compose (layer shapes, labels).
class ValidationError : public std::runtime_error {
public:
    ValidationError(const std::string& what, long layer = -1)
        : std::runtime_error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what),
          layer_(layer) {}

    long layer() const noexcept { return layer_; }

private:
    long layer_;
};

} // namespace haste

#endif // HASTE_ERROR_HPP
