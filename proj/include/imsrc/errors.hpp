#ifndef IMSRC_ERRORS_HPP
#define IMSRC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace imsrc {

/// Bad user input: violated precondition, malformed config, invalid geometry.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A spike or evaluation point coincides with a microphone (Green kernel pole).
struct SingularityError : InvalidInput {
    using InvalidInput::InvalidInput;
};

/// Numerical failure, e.g. a rank-deficient certificate system.
struct DegenerateConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File read/write failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace imsrc

#endif
