// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edistill {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// An argument is outside its documented domain (temperature, rate, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

// Run or model configuration is invalid or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Text input could not be parsed. `location` is a byte offset or a line
// number depending on the parser; the message says which.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t location)
        : Error(what), location_(location) {}
    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

// Binary file has the wrong magic, version or length.
class FormatError : public Error {
public:
    using Error::Error;
};

// Loss or parameters became non-finite during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// An API was used out of order (e.g. backward on a stale forward cache).
class ContractError : public Error {
public:
    using Error::Error;
};

} // namespace edistill
