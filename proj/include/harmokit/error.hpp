#pragma once

#include <stdexcept>
#include <string>

namespace harmokit {

// Base for data-level failures (bad files, malformed payloads). Precondition
// violations on arguments throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

}  // namespace harmokit
