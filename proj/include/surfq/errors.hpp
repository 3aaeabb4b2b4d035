#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surfq {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset)
    {
    }
    std::size_t offset() const noexcept { return offset_; }
    const char* kind() const noexcept override { return "parse"; }

private:
    std::size_t offset_;
};

/// Reference to a function, variable or parameter that is not known.
class UnknownIdentifierError : public ParseError {
public:
    UnknownIdentifierError(const std::string& name, std::size_t offset)
        : ParseError("unknown identifier '" + name + "'", offset), name_(name)
    {
    }
    const std::string& name() const noexcept { return name_; }
    const char* kind() const noexcept override { return "unknown_identifier"; }

private:
    std::string name_;
};

/// Invalid user-supplied constants (radii, grid sizes, counts ...).
class ParameterError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parameter"; }
};

/// Numerical domain violations: log of non-positive, division by zero, degenerate metric, caustics.
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

class DegenerateMetricError : public DomainError {
public:
    using DomainError::DomainError;
    const char* kind() const noexcept override { return "degenerate_metric"; }
};

class CausticError : public DomainError {
public:
    using DomainError::DomainError;
    const char* kind() const noexcept override { return "caustic"; }
};

/// An operator handed to a solver that requires weighted Hermiticity but does not have it.
class HermiticityError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "non_hermitian"; }
};

}  // namespace surfq
