#pragma once

#include <stdexcept>
#include <string>

namespace fpeval {

/// Base class for all toolkit failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed geometry: bad polygon, corrupt run-length data, dimension mismatch.
struct GeometryError : Error {
    using Error::Error;
};

/// Input file failed to parse or violates its schema.
struct ParseError : Error {
    using Error::Error;
};

/// An operation was called with inputs that break its contract
/// (unsorted detections, unknown ids, out-of-range values).
struct ContractError : Error {
    using Error::Error;
};

} // namespace fpeval
