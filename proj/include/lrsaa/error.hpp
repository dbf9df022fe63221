#pragma once

#include <stdexcept>
#include <string>

namespace lrsaa {

// Error hierarchy. The CLI maps each class onto a fixed exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments, violated preconditions, malformed configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

// File or raster read/write failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Detector plugin process failed (spawn error, non-zero exit).
class PluginError : public Error {
public:
    using Error::Error;
};

// Detector plugin answered, but the answer breaks the stdio contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace lrsaa
