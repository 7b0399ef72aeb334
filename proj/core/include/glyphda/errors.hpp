#pragma once

#include <stdexcept>
#include <string>

namespace glyphda {

// All library failures derive from Error so callers can catch one type; the
// CLI maps the concrete subclasses onto its exit-code contract.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or invalid experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Missing, unreadable, or malformed dataset files.
class DataError : public Error {
public:
    using Error::Error;
};

// Tensor or architecture shape contract violated.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Weights or checkpoint container is corrupt or does not match the model.
class CheckpointError : public Error {
public:
    using Error::Error;
};

// A loss term became NaN or infinite during training.
class NumericError : public Error {
public:
    NumericError(std::string term, const std::string& what)
        : Error(what), term_(std::move(term)) {}
    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

// Filesystem failure while writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace glyphda
