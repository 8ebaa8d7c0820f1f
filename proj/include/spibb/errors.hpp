#pragma once

#include <stdexcept>
#include <string>

namespace spibb {

/// Rejected input: malformed shapes, out-of-range indices, non-finite numbers.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A postcondition the library guarantees did not hold.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Random generation gave up (e.g. no reachable goal, no calibrated baseline).
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace spibb
