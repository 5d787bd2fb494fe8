#pragma once

#include <stdexcept>
#include <string>

namespace alens {

/// Broad failure category; the CLI maps each to a process exit code.
enum class ErrorKind {
    Config = 2,
    Data = 3,
    Numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad option values, unknown config keys, invalid strategies.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Input arrays with wrong shape or non-finite values.
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Attribution stack violating its invariants (fewer than two maps, duplicate ids, ragged dims).
class InvalidStackError : public Error {
public:
    explicit InvalidStackError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class UnknownClassError : public Error {
public:
    explicit UnknownClassError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Class selection that cannot produce two distinct classes.
class SelectionError : public Error {
public:
    explicit SelectionError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Malformed array or manifest file. `offset` is the byte position where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(ErrorKind::Data, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace alens
