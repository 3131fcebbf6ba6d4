#pragma once

#include <stdexcept>
#include <string>

namespace bca {

// Every failure the kernel can signal deliberately.  Callers that feed us
// well-formed data over compatible fields should never see any of these.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operands live over different fields / descriptors / algebras.
struct FieldMismatch : Error {
    using Error::Error;
};

// A result cannot be certified on the requested window (series precision
// exhausted, lowest term not determinable, uncertifiable product, ...).
struct PrecisionError : Error {
    using Error::Error;
};

// Mathematically invalid input: division by zero, non-separable minimal
// polynomial, expansion of a rational function with a pole at the origin, ...
struct DomainError : Error {
    using Error::Error;
};

// Input is outside the representable fragment (rejected shapes).
struct ShapeError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

} // namespace bca
