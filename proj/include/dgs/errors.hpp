// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dgs {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing or unreadable input (file not found, unreadable image, ...).
struct InputError : Error {
    using Error::Error;
};

// A file exists but its contents are malformed or truncated.
struct CorruptFileError : Error {
    using Error::Error;
};

// A file is well-formed but uses a layout/model we do not support.
struct UnsupportedFormatError : Error {
    using Error::Error;
};

// Degenerate geometry or fit (collinear hull, underdetermined least squares).
struct DegenerateError : Error {
    using Error::Error;
};

// An API precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// NaN/Inf or other numerical failure during optimization.
struct NumericalError : Error {
    using Error::Error;
};

} // namespace dgs
