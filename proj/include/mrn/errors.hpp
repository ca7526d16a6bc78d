#pragma once

#include <stdexcept>
#include <string>

namespace mrn {

// Exit-code carrying exceptions; the CLI maps them to 2/3/4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return 1; }
};

struct ConfigError : Error {
    using Error::Error;
    int exit_code() const override { return 2; }
};

struct NumericError : Error {
    using Error::Error;
    int exit_code() const override { return 3; }
};

struct InfeasibleError : Error {
    using Error::Error;
    int exit_code() const override { return 4; }
};

}  // namespace mrn
