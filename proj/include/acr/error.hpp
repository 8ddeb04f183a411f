#pragma once

#include <stdexcept>
#include <string>

namespace acr {

/// Error taxonomy mirrored by the CLI exit codes: usage=1, data=2, external=3.
enum class ErrorKind { usage, data, external };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct DataError : Error {
    explicit DataError(std::string message) : Error(ErrorKind::data, std::move(message)) {}
};

struct UsageError : Error {
    explicit UsageError(std::string message) : Error(ErrorKind::usage, std::move(message)) {}
};

struct ExternalServiceError : Error {
    explicit ExternalServiceError(std::string message)
        : Error(ErrorKind::external, std::move(message)) {}
};

/// Syntax error with a byte offset into the offending text.
struct ParseError : Error {
    ParseError(std::string message, std::size_t offset)
        : Error(ErrorKind::data, std::move(message)), offset(offset) {}

    std::size_t offset;
};

}  // namespace acr
