#pragma once

#include <stdexcept>
#include <string>

namespace mdam {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or config.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A regression fit that cannot produce a usable model.
class GlmError : public Error {
public:
    using Error::Error;
};

}  // namespace mdam
