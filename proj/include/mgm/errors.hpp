#pragma once

#include <stdexcept>
#include <string>

namespace mgm {

// Error taxonomy maps onto CLI exit codes: validation/config -> 1,
// transport -> 2, everything else -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, schema violations, invalid flags.
struct ValidationError : Error {
    using Error::Error;
};

// Bad built-in or user-supplied configuration (profiles, mock specs).
struct ConfigError : Error {
    using Error::Error;
};

// A caller broke a documented precondition.
struct ContractError : Error {
    using Error::Error;
};

// The remote backend could not be reached or answered with garbage.
struct TransportError : Error {
    TransportError(const std::string& msg, bool retryable, int status = 0)
        : Error(msg), retryable(retryable), status(status) {}
    bool retryable;
    int status;  // HTTP status when available, 0 otherwise
};

// The backend is reachable but cannot do what was asked
// (e.g. no logprob echo, no full-distribution support).
struct CapabilityError : Error {
    using Error::Error;
};

}  // namespace mgm
