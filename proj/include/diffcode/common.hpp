#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace diffcode {

using Index = std::int64_t;

// Base for all library errors; the CLI maps these to a nonzero exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension disagreement between operands.
struct ShapeError : Error {
    using Error::Error;
};

// A precondition or invariant was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// Non-finite value produced where finiteness is required.
struct NumericError : Error {
    using Error::Error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

inline void check_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace diffcode
