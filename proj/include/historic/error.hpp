#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace historic {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when an enumeration would exceed its configured size bound.
class EnumerationCapError : public Error {
public:
    EnumerationCapError(const std::string& what, std::uint64_t cap)
        : Error(what + " (cap " + std::to_string(cap) + ")"), cap_(cap) {}
    std::uint64_t cap() const { return cap_; }

private:
    std::uint64_t cap_;
};

// Bad input data: carries a JSON-pointer-like path to the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double best, double gap)
        : Error(what), best_(best), gap_(gap) {}
    double best_value() const { return best_; }
    double gap() const { return gap_; }

private:
    double best_;
    double gap_;
};

}  // namespace historic
