#pragma once

#include <stdexcept>
#include <string>

namespace polyvmt {

// Failure classes map one-to-one onto CLI exit codes.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (percentile out of range, overlapping rank groups, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-domain input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Unknown cell id, variable name, or similar lookup failure.
class LookupError : public DataError {
public:
    using DataError::DataError;
};

/// A stage's input file is missing; names the subcommand that produces it.
class MissingArtifactError : public DataError {
public:
    MissingArtifactError(const std::string& path, const std::string& producer)
        : DataError("missing artifact '" + path + "' (run the '" + producer + "' subcommand first)"),
          producer_(producer) {}

    const std::string& producer() const noexcept { return producer_; }

private:
    std::string producer_;
};

/// Model cannot be estimated (rank deficiency, all-censored response, ...).
class EstimationError : public Error {
public:
    using Error::Error;
};

} // namespace polyvmt
