#pragma once

#include <stdexcept>
#include <string>

namespace ftap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, domain violations, unparseable files.
class InputError : public Error {
public:
    using Error::Error;
};

/// An operation was called on a tree that fails validate_tree.
class InvalidTree : public InputError {
public:
    using InputError::InputError;
};

/// A numerical routine failed to produce a trustworthy answer.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A theorem-level invariant was violated (e.g. both or neither FFTAP
/// certificates). Always indicates a bug or a badly conditioned input.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

}  // namespace ftap
