// errors.hpp - exception types shared by all modules
#pragma once

#include <stdexcept>
#include <string>

namespace noisesync {

// Bad user input: unknown keys, malformed values, violated field bounds.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input is well formed but an operation's precondition does not hold.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computation produced NaN, failed to converge, or found no usable mode.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace noisesync
