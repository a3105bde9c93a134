#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace charn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// V_theta(Z_{t-1}) fell below the configured floor at time index `t` (1-based).
class VolatilityFloorError : public Error {
public:
    VolatilityFloorError(std::size_t t, double value)
        : Error("volatility " + std::to_string(value) + " below floor at t=" + std::to_string(t)),
          t_(t) {}
    [[nodiscard]] std::size_t index() const noexcept { return t_; }

private:
    std::size_t t_;
};

class SimulationDivergence : public Error {
public:
    SimulationDivergence(std::size_t step, const std::string& what)
        : Error("simulation diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// The noise family carries no usable score (zero Fisher information).
class UnusableScoreError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class LogDomainError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Wraps a failure inside replication `index` of a Monte Carlo run.
class ReplicationError : public Error {
public:
    ReplicationError(std::size_t index, const std::string& what)
        : Error("replication " + std::to_string(index) + ": " + what), index_(index) {}
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace charn
