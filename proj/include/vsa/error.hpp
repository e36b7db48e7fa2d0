#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsa {

/// Base class for every domain error raised by the workbench.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// A well-formed value that violates a model invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A branch outage that splits the network. Carries the ids of the buses cut off from the slack.
class IslandingError : public ValidationError {
  public:
    IslandingError(std::vector<int> buses, const std::string& what)
        : ValidationError(what), buses_(std::move(buses)) {}

    const std::vector<int>& disconnected_buses() const noexcept { return buses_; }

  private:
    std::vector<int> buses_;
};

class InfeasibleError : public Error {
  public:
    using Error::Error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Raised by an optimizer step when the gradient holds a NaN or infinity.
class NonFiniteGradientError : public Error {
  public:
    explicit NonFiniteGradientError(std::size_t index)
        : Error("non-finite gradient at coordinate " + std::to_string(index)), index_(index) {}

    std::size_t index() const noexcept { return index_; }

  private:
    std::size_t index_;
};

}  // namespace vsa
