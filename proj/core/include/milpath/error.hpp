#pragma once

#include <stdexcept>
#include <string>

namespace milpath {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file header, magic, version or schema.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed container holding unusable values (NaN, Inf, bad labels).
class DataError : public Error {
public:
    using Error::Error;
};

/// Truncated input or a size field that disagrees with the payload.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Shape disagreement between tensors, images or masks.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace milpath
