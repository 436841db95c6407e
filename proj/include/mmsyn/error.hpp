#pragma once

#include <stdexcept>
#include <string>

namespace mmsyn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed model tables, invalid counters, bad experiment settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite or out-of-domain arguments to an operation.
class InputError : public Error {
public:
    using Error::Error;
};

class TimeOrderError : public Error {
public:
    using Error::Error;
};

// Operation requested on a synapse with the wrong architecture.
class ArchitectureError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// Dataset files missing, truncated or with the wrong header.
class IngestError : public Error {
public:
    using Error::Error;
};

}  // namespace mmsyn
