// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mgrid {

/// Base for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model description: bad dimensions, invalid parameters, bad graphs.
class ModelError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be inverted is (numerically) singular.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed; carries the best residual reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_residual)
        : Error(what), best_residual_(best_residual) {}

    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

/// Time integration produced a non-finite state.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_valid_time)
        : Error(what), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// Scenario file violates the schema. The path names the offending field.
class SchemaError : public Error {
public:
    SchemaError(const std::string& path, const std::string& message)
        : Error(path + ": " + message), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace mgrid
