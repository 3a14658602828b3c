#pragma once

#include <stdexcept>
#include <string>

namespace selbench {

// Error hierarchy mapped onto process exit codes by the CLI:
// validation 2, numerical 3, I/O 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return 1; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 3; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 4; }
};

} // namespace selbench
