#pragma once

#include <stdexcept>
#include <string>

namespace mmmi {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

// Invalid parameters, plans, configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

// Malformed or inconsistent input data (bad grids, non-monotone patterns, ...).
class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

// Numerical failures: singular designs, optimizer nonconvergence.
class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace mmmi
