#pragma once

#include <stdexcept>
#include <string>

namespace gdesigner {

/// Bad or inconsistent configuration (dimension mismatch, unknown kind, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical routine failed to converge or produced non-finite values.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A structural invariant was violated (e.g. a cycle reached the scheduler).
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

/// Network-level failure talking to an HTTP backend (after retries).
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The remote spoke HTTP but the payload or status was unusable.
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(const std::string& msg, int status = 0)
        : std::runtime_error(msg), status_code(status) {}
    int status_code;
};

/// Checkpoint or config file with an unexpected schema/version.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A dialogue round aborted; carries what had completed so far.
class ExecutionError : public std::runtime_error {
public:
    explicit ExecutionError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace gdesigner
