#pragma once

#include <stdexcept>
#include <string>

namespace burgers {

/// Argument outside the mathematical domain of an operation (k <= 0, t = 0 for BEL, rho < 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Quadrature grid too coarse for the requested number of modes.
class ResolutionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A state left the blow-up ball or became non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, unsigned long long path_index = 0)
        : std::runtime_error(what), path_(path_index) {}

    unsigned long long path_index() const noexcept { return path_; }

private:
    unsigned long long path_;
};

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace burgers
