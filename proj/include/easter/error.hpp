#pragma once

#include <stdexcept>
#include <string>

namespace easter {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's shape or argument contract.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// A configuration document or value is invalid.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The label cannot be aligned to the available frames.
class InfeasibleAlignment : public Error {
public:
    using Error::Error;
};

/// Malformed corpus input (manifest, vocabulary, image).
class DataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Checkpoint structure problems: bad magic, unsupported version, truncation.
class FormatError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

[[noreturn]] inline void contract_fail(const std::string& what) { throw ContractViolation(what); }

inline void require(bool cond, const char* what) {
    if (!cond) contract_fail(what);
}

}  // namespace easter
