#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>

namespace exqr {

// Base of every error raised by the library. Each subclass corresponds to one
// failure class callers may want to distinguish.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

// Intercept plus covariates do not span a (p+1)-dimensional space.
class DegenerateDesignError : public Error {
public:
    using Error::Error;
};

class SolverFailureError : public Error {
public:
    SolverFailureError(const std::string& what, std::size_t iterations)
        : Error(what), iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

class InsufficientTailWidthError : public Error {
public:
    using Error::Error;
};

class InvalidConfigError : public Error {
public:
    using Error::Error;
};

// Too many covariate points had a non-positive intermediate quantile base.
class TailDegeneracyError : public Error {
public:
    TailDegeneracyError(const std::string& what, std::size_t excluded, std::size_t total)
        : Error(what), excluded_(excluded), total_(total) {}

    std::size_t excluded() const noexcept { return excluded_; }
    std::size_t total() const noexcept { return total_; }

private:
    std::size_t excluded_;
    std::size_t total_;
};

class InvalidDirectionError : public Error {
public:
    using Error::Error;
};

class InvalidBaseError : public Error {
public:
    using Error::Error;
};

// Requested level lies below the extrapolation base; use conventional QR.
class BelowTailError : public Error {
public:
    BelowTailError(const std::string& what, double tau, double tau_base)
        : Error(what), tau_(tau), tau_base_(tau_base) {}

    double tau() const noexcept { return tau_; }
    double tau_base() const noexcept { return tau_base_; }

private:
    double tau_;
    double tau_base_;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string field, std::size_t line = 0)
        : Error(what), field_(std::move(field)), line_(line) {}

    // Name of the offending field, or empty when the error is positional.
    const std::string& field() const noexcept { return field_; }
    // 1-based line number for text inputs, 0 when not applicable.
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

class EmptySeriesError : public Error {
public:
    using Error::Error;
};

class EmptyComparisonError : public Error {
public:
    using Error::Error;
};

class BatchError : public Error {
public:
    using Error::Error;
};

// A failure inside one basin's run. The message is prefixed with the basin id;
// the original exception is kept for callers that need its type.
class BasinError : public Error {
public:
    BasinError(std::string basin_id, const std::string& cause_what, std::exception_ptr cause)
        : Error("basin " + basin_id + ": " + cause_what), basin_id_(std::move(basin_id)), cause_(std::move(cause)) {}

    const std::string& basin_id() const noexcept { return basin_id_; }
    [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

private:
    std::string basin_id_;
    std::exception_ptr cause_;
};

}  // namespace exqr
