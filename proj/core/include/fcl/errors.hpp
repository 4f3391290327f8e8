#pragma once

#include <stdexcept>

namespace fcl {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or length mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Input is mathematically unusable (e.g. normalizing a near-zero vector).
struct DegenerateInputError : Error {
    using Error::Error;
};

// A computation produced or received a non-finite value.
struct NumericError : Error {
    using Error::Error;
};

// A documented precondition of an operation was violated.
struct ContractError : Error {
    using Error::Error;
};

// Caller mixed up protocol roles (wrong partition, same-volume pair, ...).
struct ProtocolError : Error {
    using Error::Error;
};

// Requested more samples than the pool holds.
struct InsufficientPoolError : Error {
    using Error::Error;
};

// A client shard is too small for the requested operation.
struct InsufficientDataError : Error {
    using Error::Error;
};

// Configuration file or value rejected during validation.
struct ConfigError : Error {
    using Error::Error;
};

// File I/O failure or malformed on-disk format.
struct IoError : Error {
    using Error::Error;
};

}  // namespace fcl
