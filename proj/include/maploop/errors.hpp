#pragma once

#include <stdexcept>
#include <string>

namespace maploop {

// Base of every error the library throws. The CLI maps ContractError to exit
// status 2 and IoError to exit status 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class InvalidGeometry : public ContractError {
public:
    using ContractError::ContractError;
};

class MissingTarget : public ContractError {
public:
    using ContractError::ContractError;
};

class RangeError : public ContractError {
public:
    using ContractError::ContractError;
};

// Tile not served / already analyzed / unknown idempotency conflict.
class ProtocolError : public ContractError {
public:
    using ContractError::ContractError;
};

class SessionClosed : public ContractError {
public:
    using ContractError::ContractError;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ContractError(message);
    }
}

} // namespace maploop
